import json
from pathlib import Path

import pytest

from alsim.config import config_from_dict


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {outcome}")


def write_jsonl(path: Path, records: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return path


def make_corpus_dir(
    root: Path,
    train: list[dict],
    dev: list[dict],
    test: list[dict],
    name: str = "raw",
) -> Path:
    corpus = root / name
    write_jsonl(corpus / "train.jsonl", train)
    write_jsonl(corpus / "dev.jsonl", dev)
    write_jsonl(corpus / "test.jsonl", test)
    return corpus


def base_config_dict(source_path: str, store_root: str, **tweaks) -> dict:
    """Small, fast experiment config; tweaks override section dicts."""
    tree = {
        "data": {"source_path": source_path},
        "experiment": {
            "step_size": 2,
            "budget": 4,
            "initial_ratio": 0.2,
            "seeds": [42, 4711],
        },
        "teacher": {"strategy": "random"},
        "trainer": {
            "learning_rate": 0.5,
            "epochs_per_step": 2,
            "l2_penalty": 1e-4,
            "ngram_order": 1,
            "vocab_size": None,
        },
        "tracking": {"revision": "test-rev", "store_root": store_root, "worker_count": 1},
    }
    for section, values in tweaks.items():
        tree[section].update(values)
    return tree


def make_config(source_path, store_root, **tweaks):
    return config_from_dict(
        base_config_dict(str(source_path), str(store_root), **tweaks)
    )


@pytest.fixture
def tiny_corpus(tmp_path: Path) -> Path:
    """10 train / 4 dev / 4 test docs, two classes with clear keywords."""
    def doc(i, label):
        word = "good great fine" if label == "pos" else "bad awful poor"
        return {"text": f"{word} item{i}", "label": label}

    train = [doc(i, "pos" if i % 2 else "neg") for i in range(10)]
    dev = [doc(100 + i, "pos" if i % 2 else "neg") for i in range(4)]
    test = [doc(200 + i, "pos" if i % 2 else "neg") for i in range(4)]
    return make_corpus_dir(tmp_path, train, dev, test)
