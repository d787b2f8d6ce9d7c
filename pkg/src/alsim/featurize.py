"""Deterministic text featurization: n-gram tokens and TF-IDF vectors.

Both the classifier and the clustering strategy consume the same fixed
feature space, fitted once on the full train split before any simulation
starts. Keeping the space fixed across propose steps makes learning curves
comparable step to step.

Weights use the smoothed inverse document frequency

    idf(t) = 1 + ln((1 + N) / (1 + df(t)))

with raw term counts as tf, followed by L2 normalization of each document
vector (an all-zero vector stays zero). Out-of-vocabulary tokens are
ignored. Tokenization lowercases, splits on non-alphanumeric codepoints,
and emits all contiguous n-grams up to the configured order, joined by a
single space.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

SparseVector = list[tuple[int, float]]


def tokenize(text: str, ngram_order: int = 1) -> list[str]:
    """Lowercase, split on non-alphanumerics, emit n-grams up to the order."""
    if not 1 <= ngram_order <= 3:
        raise ValueError(f"ngram_order must lie in 1..3, got {ngram_order}")
    unigrams = _TOKEN_RE.findall(text.lower())
    if ngram_order == 1:
        return unigrams
    tokens: list[str] = []
    for n in range(1, ngram_order + 1):
        for i in range(len(unigrams) - n + 1):
            tokens.append(" ".join(unigrams[i : i + n]))
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Frozen term table: dense indices, per-term document frequency."""

    terms: tuple[str, ...]
    df: tuple[int, ...]
    doc_count: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {term: i for i, term in enumerate(self.terms)}
        )

    @property
    def size(self) -> int:
        return len(self.terms)

    def index_of(self, term: str) -> int | None:
        return self._index.get(term)  # type: ignore[attr-defined]

    def idf(self) -> np.ndarray:
        df = np.asarray(self.df, dtype=np.float64)
        return 1.0 + np.log((1.0 + self.doc_count) / (1.0 + df))


def fit_vocabulary(
    texts: Sequence[str], ngram_order: int = 1, max_size: int | None = None
) -> Vocabulary:
    """Count document frequencies and keep the most frequent terms.

    Truncation order is document frequency descending with ties broken by
    term lexicographically ascending; retained terms get dense indices in
    that same order.
    """
    if not texts:
        raise ValueError("cannot fit a vocabulary on an empty document list")
    if max_size is not None and max_size < 1:
        raise ValueError(f"vocabulary cap must be >= 1, got {max_size}")
    df_counter: Counter[str] = Counter()
    for text in texts:
        df_counter.update(set(tokenize(text, ngram_order)))
    ranked = sorted(df_counter.items(), key=lambda kv: (-kv[1], kv[0]))
    if max_size is not None:
        ranked = ranked[:max_size]
    terms = tuple(term for term, _ in ranked)
    df = tuple(count for _, count in ranked)
    return Vocabulary(terms=terms, df=df, doc_count=len(texts))


def tfidf_vectorize(text: str, vocab: Vocabulary, ngram_order: int = 1) -> SparseVector:
    """TF-IDF weights for one document as sorted (index, weight) pairs."""
    counts: Counter[int] = Counter()
    for token in tokenize(text, ngram_order):
        idx = vocab.index_of(token)
        if idx is not None:
            counts[idx] += 1
    if not counts:
        return []
    pairs = []
    norm_sq = 0.0
    for idx in sorted(counts):
        weight = counts[idx] * (
            1.0 + math.log((1.0 + vocab.doc_count) / (1.0 + vocab.df[idx]))
        )
        pairs.append((idx, weight))
        norm_sq += weight * weight
    norm = math.sqrt(norm_sq)
    return [(idx, w / norm) for idx, w in pairs]


class TfidfFeaturizer:
    """Fit-once TF-IDF vectorizer over n-gram tokens.

    Follows the usual estimator shape: ``fit`` on an iterable of texts,
    ``transform`` to a CSR matrix whose rows are L2-normalized TF-IDF
    vectors in the fitted feature space.
    """

    def __init__(self, ngram_order: int = 1, max_vocab: int | None = None):
        self.ngram_order = ngram_order
        self.max_vocab = max_vocab
        self.vocabulary_: Vocabulary | None = None

    def get_params(self) -> dict:
        return {"ngram_order": self.ngram_order, "max_vocab": self.max_vocab}

    def fit(self, texts: Sequence[str]) -> "TfidfFeaturizer":
        self.vocabulary_ = fit_vocabulary(texts, self.ngram_order, self.max_vocab)
        return self

    def _require_fitted(self) -> Vocabulary:
        if self.vocabulary_ is None:
            raise RuntimeError("featurizer is not fitted; call fit() first")
        return self.vocabulary_

    def vectorize(self, text: str) -> SparseVector:
        return tfidf_vectorize(text, self._require_fitted(), self.ngram_order)

    def transform(self, texts: Iterable[str]) -> sparse.csr_matrix:
        vocab = self._require_fitted()
        data: list[float] = []
        indices: list[int] = []
        indptr = [0]
        for text in texts:
            for idx, weight in self.vectorize(text):
                indices.append(idx)
                data.append(weight)
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (
                np.asarray(data, dtype=np.float64),
                np.asarray(indices, dtype=np.int32),
                np.asarray(indptr, dtype=np.int32),
            ),
            shape=(len(indptr) - 1, vocab.size),
        )

    def fit_transform(self, texts: Sequence[str]) -> sparse.csr_matrix:
        return self.fit(texts).transform(texts)


# ---------------------------------------------------------------------------
# Vocabulary artifact (term, index, df per line)
# ---------------------------------------------------------------------------


def write_vocabulary(vocab: Vocabulary, path: Path) -> None:
    lines = [f"# doc_count={vocab.doc_count}"]
    for i, (term, df) in enumerate(zip(vocab.terms, vocab.df)):
        lines.append(f"{json.dumps(term, ensure_ascii=False)}\t{i}\t{df}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vocabulary(path: Path) -> Vocabulary:
    doc_count = None
    terms: list[str] = []
    df: list[int] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line.lstrip("# ").partition("=")
            if key == "doc_count":
                doc_count = int(value)
            continue
        term_json, idx_text, df_text = line.rsplit("\t", 2)
        if int(idx_text) != len(terms):
            raise ValueError(f"{path}: vocabulary indices are not dense")
        terms.append(json.loads(term_json))
        df.append(int(df_text))
    if doc_count is None:
        raise ValueError(f"{path}: vocabulary file is missing its doc_count header")
    return Vocabulary(terms=tuple(terms), df=tuple(df), doc_count=doc_count)
