"""Online multiclass linear classifier over TF-IDF features.

The model is softmax regression trained with minibatch SGD on cross-entropy
plus an L2 penalty on the weights (bias unregularized). Training is warm
started: each call continues from the incoming weights and covers all
documents proposed so far, which is the retraining discipline that keeps
continual updates from forgetting earlier batches.

The shuffle stream is a persistent PCG64 generator owned by the model and
serialized into every checkpoint. Consequences: training twice for E epochs
equals training once for 2E epochs bit for bit, and a resumed run replays
exactly the permutations the uninterrupted run would have drawn.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import CorruptArtifactError, NonFiniteLossError

# Fixed minibatch size; the trainer config deliberately exposes only
# learning rate, epochs, penalty, and the feature-space knobs.
BATCH_SIZE = 32

_CKPT_MAGIC = b"ALCK"
_CKPT_VERSION = 1


@dataclass
class LinearModel:
    """Weight matrix, bias, step counter, and the trainer's RNG stream."""

    weights: np.ndarray  # (label_count, vocab_size), float64
    bias: np.ndarray  # (label_count,), float64
    step_counter: int
    rng: np.random.Generator

    @classmethod
    def zeros(
        cls, label_count: int, vocab_size: int, rng: np.random.Generator
    ) -> "LinearModel":
        return cls(
            weights=np.zeros((label_count, vocab_size), dtype=np.float64),
            bias=np.zeros(label_count, dtype=np.float64),
            step_counter=0,
            rng=rng,
        )

    @property
    def label_count(self) -> int:
        return self.weights.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[1]


def softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_scores(model: LinearModel, X: sparse.csr_matrix) -> np.ndarray:
    _check_dims(model, X)
    return np.asarray(X @ model.weights.T) + model.bias


def predict_proba(model: LinearModel, X: sparse.csr_matrix) -> np.ndarray:
    """Per-document probability rows (softmax of linear scores)."""
    return softmax(predict_scores(model, X))


def predict_labels(model: LinearModel, X: sparse.csr_matrix) -> np.ndarray:
    return np.argmax(predict_scores(model, X), axis=1)


def _check_dims(model: LinearModel, X: sparse.csr_matrix) -> None:
    if X.shape[1] != model.vocab_size:
        raise ValueError(
            f"feature dimension mismatch: matrix has {X.shape[1]} columns, "
            f"model expects {model.vocab_size}"
        )


def loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    X: sparse.csr_matrix,
    y: np.ndarray,
    l2_penalty: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Full-batch cross-entropy loss and its analytic gradient.

    Pure function of its inputs; used by the SGD loop's finite-difference
    verification and available for diagnostics.
    """
    n = X.shape[0]
    scores = np.asarray(X @ weights.T) + bias
    probs = softmax(scores)
    picked = probs[np.arange(n), y]
    ce = float(-np.log(np.clip(picked, 1e-300, None)).mean())
    loss = ce + 0.5 * l2_penalty * float((weights * weights).sum())
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = np.asarray((X.T @ delta).T) + l2_penalty * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def mean_loss(
    model: LinearModel, X: sparse.csr_matrix, y: np.ndarray, l2_penalty: float
) -> float:
    loss, _, _ = loss_and_gradient(model.weights, model.bias, X, y, l2_penalty)
    return loss


def train_online(
    model: LinearModel,
    X: sparse.csr_matrix,
    y: np.ndarray,
    *,
    learning_rate: float,
    epochs: int,
    l2_penalty: float,
    batch_size: int = BATCH_SIZE,
) -> LinearModel:
    """Warm-start SGD over all labeled documents; mutates and returns model.

    Rows of ``X`` are every document proposed so far, in proposal order;
    each epoch shuffles them with the model's own RNG stream.
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("training requires at least one labeled document")
    _check_dims(model, X)
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"label vector shape {y.shape} does not match {n} documents")
    if y.min() < 0 or y.max() >= model.label_count:
        raise ValueError("label index outside the model's label count")

    W, b = model.weights, model.bias
    for epoch in range(epochs):
        perm = model.rng.permutation(n)
        ce_sum = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            Xb = X[idx]
            yb = y[idx]
            rows = np.arange(len(idx))
            probs = softmax(np.asarray(Xb @ W.T) + b)
            ce_sum += float(-np.log(np.clip(probs[rows, yb], 1e-300, None)).sum())
            delta = probs
            delta[rows, yb] -= 1.0
            delta /= len(idx)
            W -= learning_rate * (np.asarray((Xb.T @ delta).T) + l2_penalty * W)
            b -= learning_rate * delta.sum(axis=0)
        epoch_loss = ce_sum / n + 0.5 * l2_penalty * float((W * W).sum())
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(
                f"non-finite training loss at step {model.step_counter + 1}, "
                f"epoch {epoch + 1}"
            )
    model.step_counter += 1
    return model


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvaluationReport:
    """Per-label precision/recall/F1 plus their unweighted mean."""

    split: str
    labeled_count: int
    macro_f1: float
    per_label: dict[str, LabelMetrics]

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "labeled_count": self.labeled_count,
            "macro_f1": self.macro_f1,
            "per_label": {
                name: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for name, m in self.per_label.items()
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvaluationReport":
        return cls(
            split=payload["split"],
            labeled_count=payload["labeled_count"],
            macro_f1=payload["macro_f1"],
            per_label={
                name: LabelMetrics(m["precision"], m["recall"], m["f1"])
                for name, m in payload["per_label"].items()
            },
        )


def classification_report(
    y_true: np.ndarray, y_pred: np.ndarray, label_names: tuple[str, ...]
) -> tuple[dict[str, LabelMetrics], float]:
    """Precision/recall/F1 per label with the 0/0 := 0 convention.

    The macro score averages over every label in the vocabulary, including
    labels absent from this split or never predicted.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    per_label: dict[str, LabelMetrics] = {}
    f1_sum = 0.0
    for index, name in enumerate(label_names):
        tp = int(np.sum((y_true == index) & (y_pred == index)))
        fp = int(np.sum((y_true != index) & (y_pred == index)))
        fn = int(np.sum((y_true == index) & (y_pred != index)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_label[name] = LabelMetrics(precision=precision, recall=recall, f1=f1)
        f1_sum += f1
    return per_label, f1_sum / len(label_names)


def evaluate(
    model: LinearModel,
    X: sparse.csr_matrix,
    y: np.ndarray,
    label_names: tuple[str, ...],
    split: str,
    labeled_count: int,
) -> EvaluationReport:
    if X.shape[0] == 0:
        raise ValueError(f"cannot evaluate on empty split {split!r}")
    y_pred = predict_labels(model, X)
    per_label, macro = classification_report(y, y_pred, label_names)
    return EvaluationReport(
        split=split, labeled_count=labeled_count, macro_f1=macro, per_label=per_label
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def _rng_state_bytes(rng: np.random.Generator) -> bytes:
    state = rng.bit_generator.state
    if state["bit_generator"] != "PCG64":
        raise ValueError("checkpointing supports PCG64 generators only")
    inner = state["state"]
    return (
        struct.pack("<BQ", int(state["has_uint32"]), int(state["uinteger"]))
        + int(inner["state"]).to_bytes(16, "little")
        + int(inner["inc"]).to_bytes(16, "little")
    )


def _rng_from_state_bytes(blob: bytes) -> np.random.Generator:
    has_uint32, uinteger = struct.unpack("<BQ", blob[:9])
    state_int = int.from_bytes(blob[9:25], "little")
    inc_int = int.from_bytes(blob[25:41], "little")
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": state_int, "inc": inc_int},
        "has_uint32": has_uint32,
        "uinteger": uinteger,
    }
    return rng


def checkpoint_bytes(model: LinearModel) -> bytes:
    """Serialize the model bit-exactly: header, weights, bias, RNG state."""
    label_count, vocab_size = model.weights.shape
    body = _CKPT_MAGIC
    body += struct.pack("<IQQQ", _CKPT_VERSION, vocab_size, label_count, model.step_counter)
    body += np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
    body += np.ascontiguousarray(model.bias, dtype="<f8").tobytes()
    body += _rng_state_bytes(model.rng)
    return body + hashlib.sha256(body).digest()


def model_from_checkpoint_bytes(blob: bytes, source: str = "<bytes>") -> LinearModel:
    if len(blob) < 32:
        raise CorruptArtifactError(f"{source}: checkpoint truncated")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptArtifactError(f"{source}: checkpoint digest mismatch")
    if body[:4] != _CKPT_MAGIC:
        raise CorruptArtifactError(f"{source}: not a model checkpoint")
    version, vocab_size, label_count, step_counter = struct.unpack_from("<IQQQ", body, 4)
    if version != _CKPT_VERSION:
        raise CorruptArtifactError(f"{source}: unsupported checkpoint version {version}")
    offset = 4 + struct.calcsize("<IQQQ")
    w_bytes = label_count * vocab_size * 8
    expected = offset + w_bytes + label_count * 8 + 41
    if len(body) != expected:
        raise CorruptArtifactError(f"{source}: checkpoint truncated")
    weights = (
        np.frombuffer(body, dtype="<f8", count=label_count * vocab_size, offset=offset)
        .reshape(label_count, vocab_size)
        .copy()
    )
    offset += w_bytes
    bias = np.frombuffer(body, dtype="<f8", count=label_count, offset=offset).copy()
    offset += label_count * 8
    rng = _rng_from_state_bytes(body[offset:])
    return LinearModel(
        weights=weights, bias=bias, step_counter=step_counter, rng=rng
    )


def store_checkpoint(model: LinearModel, path: str | Path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_bytes(model))
    tmp.replace(path)
    return path


def restore_checkpoint(path: str | Path) -> LinearModel:
    path = Path(path)
    if not path.is_file():
        raise CorruptArtifactError(f"{path}: checkpoint file missing")
    return model_from_checkpoint_bytes(path.read_bytes(), source=str(path))
