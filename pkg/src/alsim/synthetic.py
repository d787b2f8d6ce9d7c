"""Synthetic keyword-planted corpora for demos, tests, and calibration.

Each document is a bag of planted class keywords plus label-agnostic
distractor tokens (a fixed fraction of the length). Difficulty is shaped by
three knobs: a skewed keyword distribution (rare keywords need many samples
to be covered), a per-document contamination share of other-class keywords
(bounded below one half, so the majority class always matches the label and
labels stay noise-free), and the document length range. Everything is
generated from one seeded stream, so a given parameter set is one corpus.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

DEFAULT_CLASS_NAMES = ("neg", "pos")


def _class_names(n_labels: int) -> list[str]:
    if n_labels == 2:
        return list(DEFAULT_CLASS_NAMES)
    return [f"c{i}" for i in range(n_labels)]


def _skewed_index(rng: np.random.Generator, size: int, skew: float) -> int:
    # power(skew) piles mass near 1; flipping puts it on low (frequent) ids.
    return int(size * (1.0 - rng.power(skew)))


def _make_doc(
    rng: np.random.Generator,
    label: int,
    n_labels: int,
    keywords_per_label: int,
    distractor_vocab: int,
    doc_len: tuple[int, int],
    distractor_rate: float,
    max_mix: float,
    keyword_skew: float,
) -> str:
    length = int(rng.integers(doc_len[0], doc_len[1] + 1))
    n_distract = int(round(distractor_rate * length))
    n_keywords = max(1, length - n_distract)
    n_other = int(n_keywords * rng.uniform(0.0, max_mix))
    n_own = n_keywords - n_other

    tokens: list[str] = []
    for _ in range(n_own):
        idx = _skewed_index(rng, keywords_per_label, keyword_skew)
        tokens.append(f"kw{label}w{idx}")
    if n_other:
        other_labels = [l for l in range(n_labels) if l != label]
        for _ in range(n_other):
            other = other_labels[int(rng.integers(len(other_labels)))]
            idx = _skewed_index(rng, keywords_per_label, keyword_skew)
            tokens.append(f"kw{other}w{idx}")
    for _ in range(n_distract):
        tokens.append(f"fill{int(rng.integers(distractor_vocab))}")
    rng.shuffle(tokens)
    return " ".join(tokens)


def make_synthetic_dataset(
    out_dir: str | Path,
    *,
    n_train: int = 2000,
    n_dev: int = 500,
    n_test: int = 500,
    n_labels: int = 2,
    keywords_per_label: int = 150,
    distractor_vocab: int = 300,
    doc_len: tuple[int, int] = (8, 16),
    distractor_rate: float = 0.2,
    max_mix: float = 0.45,
    keyword_skew: float = 3.0,
    seed: int = 7,
) -> dict[str, Path]:
    """Write train/dev/test JSONL files; returns the written paths."""
    if not 0.0 <= max_mix < 0.5:
        raise ValueError("max_mix must stay below 0.5 to keep labels noise-free")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    names = _class_names(n_labels)
    paths: dict[str, Path] = {}
    for split, count in (("train", n_train), ("dev", n_dev), ("test", n_test)):
        path = out_dir / f"{split}.jsonl"
        with path.open("w", encoding="utf-8") as handle:
            for _ in range(count):
                label = int(rng.integers(n_labels))
                text = _make_doc(
                    rng,
                    label,
                    n_labels,
                    keywords_per_label,
                    distractor_vocab,
                    doc_len,
                    distractor_rate,
                    max_mix,
                    keyword_skew,
                )
                handle.write(
                    json.dumps({"text": text, "label": names[label]}) + "\n"
                )
        paths[split] = path
    return paths
