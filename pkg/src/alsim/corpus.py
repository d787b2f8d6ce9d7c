"""Dataset ingestion and annotation-state bookkeeping.

Raw corpora are JSONL files (one record per line) under a source directory,
one file per split. A record carries a text field plus either a class-name
string (classification) or a ``labels`` list of ``[start, end, label]``
character spans. Conversion assigns every document a global id, dense
``0..N-1`` across train, then dev, then test, and freezes the label
vocabulary in first-appearance order. Converted splits are stored in a
compact length-prefixed binary format with a sidecar label-vocabulary file,
so loading them back never re-parses JSON.

Span corpora are converted and validated like any other dataset but are
rejected when a simulation is started; only classification is trainable.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .config import ExperimentConfig
from .errors import CorruptArtifactError, DataError

logger = logging.getLogger(__name__)

CLASSIFICATION = "classification"
SPANS = "spans"

_MAGIC = b"ALCV"
_FORMAT_VERSION = 1
_KIND_CODES = {CLASSIFICATION: 0, SPANS: 1}
_KIND_NAMES = {code: name for name, code in _KIND_CODES.items()}
_NO_LABEL = 0xFFFFFFFF

SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class RawDocument:
    """One parsed JSONL record, before id assignment."""

    text: str
    label: str | None = None
    spans: tuple[tuple[int, int, str], ...] | None = None
    preset_id: int | None = None


@dataclass(frozen=True)
class AnnotatedDocument:
    """One corpus item with its global id and gold annotation.

    ``gold_label`` indexes the dataset's label vocabulary; span documents
    carry -1 there and keep their spans as (start, end, label_index).
    """

    id: int
    text: str
    gold_label: int
    spans: tuple[tuple[int, int, int], ...] | None = None


@dataclass(frozen=True)
class DatasetSplit:
    """Converted corpus: three disjoint splits sharing one label vocabulary."""

    train: tuple[AnnotatedDocument, ...]
    dev: tuple[AnnotatedDocument, ...]
    test: tuple[AnnotatedDocument, ...]
    label_names: tuple[str, ...]
    kind: str = CLASSIFICATION

    @property
    def label_count(self) -> int:
        return len(self.label_names)

    def split(self, name: str) -> tuple[AnnotatedDocument, ...]:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


# ---------------------------------------------------------------------------
# Raw JSONL parsing
# ---------------------------------------------------------------------------


def _parse_record(
    record: object, where: str, text_field: str, label_field: str
) -> RawDocument:
    if not isinstance(record, dict):
        raise DataError(f"{where}: record is not a JSON object")
    text = record.get(text_field)
    if not isinstance(text, str) or not text:
        raise DataError(f"{where}: field {text_field!r} must be a non-empty string")

    preset_id = record.get("id")
    if preset_id is not None and (isinstance(preset_id, bool) or not isinstance(preset_id, int)):
        raise DataError(f"{where}: field 'id' must be an integer when present")

    if label_field in record:
        label = record[label_field]
        if not isinstance(label, str) or not label:
            raise DataError(
                f"{where}: field {label_field!r} must be a non-empty string"
            )
        return RawDocument(text=text, label=label, preset_id=preset_id)

    if "labels" in record:
        spans_raw = record["labels"]
        if not isinstance(spans_raw, list):
            raise DataError(f"{where}: field 'labels' must be a list of spans")
        spans = []
        for i, span in enumerate(spans_raw):
            if (
                not isinstance(span, (list, tuple))
                or len(span) != 3
                or isinstance(span[0], bool)
                or isinstance(span[1], bool)
                or not isinstance(span[0], int)
                or not isinstance(span[1], int)
                or not isinstance(span[2], str)
            ):
                raise DataError(
                    f"{where}: span {i} must be [start, end, label] with integer offsets"
                )
            start, end, name = span
            if not (0 <= start < end <= len(text)):
                raise DataError(
                    f"{where}: span {i} offsets [{start}, {end}) fall outside the "
                    f"text of length {len(text)}"
                )
            spans.append((start, end, name))
        return RawDocument(text=text, spans=tuple(spans), preset_id=preset_id)

    raise DataError(
        f"{where}: unknown schema, record has neither {label_field!r} nor 'labels'"
    )


def read_jsonl(path: Path, text_field: str, label_field: str) -> list[RawDocument]:
    """Parse one JSONL split file; errors name the file and line number."""
    if not path.is_file():
        raise FileNotFoundError(f"split file not found: {path}")
    docs: list[RawDocument] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON ({exc.msg})") from exc
            docs.append(_parse_record(record, where, text_field, label_field))
    if not docs:
        raise DataError(f"{path}: split is empty")
    return docs


def _dataset_kind(splits: dict[str, list[RawDocument]], paths: dict[str, Path]) -> str:
    kind = None
    for name in SPLIT_NAMES:
        for i, doc in enumerate(splits[name]):
            this = CLASSIFICATION if doc.label is not None else SPANS
            if kind is None:
                kind = this
            elif this != kind:
                raise DataError(
                    f"{paths[name]}: record {i + 1} uses the {this} schema but the "
                    f"dataset started with {kind}; mixed schemas are not supported"
                )
    assert kind is not None
    return kind


def _preset_ids_honored(splits: dict[str, list[RawDocument]]) -> bool:
    """Preset ids count only if they are dense 0..N-1 in split order."""
    offset = 0
    for name in SPLIT_NAMES:
        docs = splits[name]
        ids = [d.preset_id for d in docs]
        if any(i is None for i in ids):
            return False
        if set(ids) != set(range(offset, offset + len(docs))):
            return False
        offset += len(docs)
    return True


def convert_raw(raw_dir: str | Path, cfg: ExperimentConfig) -> DatasetSplit:
    """Convert the raw JSONL dataset under ``raw_dir`` per the id convention.

    Ids are assigned sequentially, train first, then dev, then test. Records
    that already carry ids keep them when those ids are exactly the dense
    per-split ranges the convention would assign (the split is then ordered
    by id); anything else is re-assigned with a warning.
    """
    raw_dir = Path(raw_dir)
    paths = {
        "train": raw_dir / cfg.data.train_file,
        "dev": raw_dir / cfg.data.dev_file,
        "test": raw_dir / cfg.data.test_file,
    }
    splits = {
        name: read_jsonl(paths[name], cfg.data.text_field, cfg.data.label_field)
        for name in SPLIT_NAMES
    }
    kind = _dataset_kind(splits, paths)

    if _preset_ids_honored(splits):
        for name in SPLIT_NAMES:
            splits[name].sort(key=lambda d: d.preset_id)  # type: ignore[arg-type, return-value]
    elif any(d.preset_id is not None for docs in splits.values() for d in docs):
        logger.warning(
            "pre-assigned ids in %s are not dense and unique per split; "
            "re-assigning sequential ids",
            raw_dir,
        )

    label_names: list[str] = []
    label_index: dict[str, int] = {}

    def intern(name: str) -> int:
        if name not in label_index:
            label_index[name] = len(label_names)
            label_names.append(name)
        return label_index[name]

    converted: dict[str, list[AnnotatedDocument]] = {}
    next_id = 0
    for name in SPLIT_NAMES:
        out: list[AnnotatedDocument] = []
        for doc in splits[name]:
            if doc.label is not None:
                out.append(
                    AnnotatedDocument(id=next_id, text=doc.text, gold_label=intern(doc.label))
                )
            else:
                spans = tuple((s, e, intern(l)) for s, e, l in (doc.spans or ()))
                out.append(
                    AnnotatedDocument(id=next_id, text=doc.text, gold_label=-1, spans=spans)
                )
            next_id += 1
        converted[name] = out

    return DatasetSplit(
        train=tuple(converted["train"]),
        dev=tuple(converted["dev"]),
        test=tuple(converted["test"]),
        label_names=tuple(label_names),
        kind=kind,
    )


# ---------------------------------------------------------------------------
# Converted binary format
# ---------------------------------------------------------------------------


def _encode_doc(doc: AnnotatedDocument) -> bytes:
    text_bytes = doc.text.encode("utf-8")
    label = _NO_LABEL if doc.gold_label < 0 else doc.gold_label
    spans = doc.spans or ()
    body = struct.pack("<QI", doc.id, len(text_bytes))
    body += text_bytes
    body += struct.pack("<II", label, len(spans))
    for start, end, lbl in spans:
        body += struct.pack("<III", start, end, lbl)
    return struct.pack("<I", len(body)) + body


def write_split_file(docs: Sequence[AnnotatedDocument], kind: str, path: Path) -> None:
    """Write one split as length-prefixed records (deterministic bytes)."""
    with path.open("wb") as handle:
        handle.write(_MAGIC)
        handle.write(struct.pack("<HBI", _FORMAT_VERSION, _KIND_CODES[kind], len(docs)))
        for doc in docs:
            handle.write(_encode_doc(doc))


def read_split_file(path: Path) -> tuple[list[AnnotatedDocument], str]:
    data = Path(path).read_bytes()
    view = memoryview(data)

    def take(n: int) -> memoryview:
        nonlocal view
        if len(view) < n:
            raise CorruptArtifactError(f"{path}: truncated converted split")
        chunk, view = view[:n], view[n:]
        return chunk

    if bytes(take(4)) != _MAGIC:
        raise CorruptArtifactError(f"{path}: not a converted split file")
    version, kind_code, count = struct.unpack("<HBI", take(7))
    if version != _FORMAT_VERSION:
        raise CorruptArtifactError(f"{path}: unsupported format version {version}")
    if kind_code not in _KIND_NAMES:
        raise CorruptArtifactError(f"{path}: unknown task kind {kind_code}")

    docs: list[AnnotatedDocument] = []
    for _ in range(count):
        (body_len,) = struct.unpack("<I", take(4))
        body = take(body_len)
        pos = 0
        doc_id, text_len = struct.unpack_from("<QI", body, pos)
        pos += 12
        text = bytes(body[pos : pos + text_len]).decode("utf-8")
        pos += text_len
        label, span_count = struct.unpack_from("<II", body, pos)
        pos += 8
        spans = []
        for _ in range(span_count):
            spans.append(struct.unpack_from("<III", body, pos))
            pos += 12
        docs.append(
            AnnotatedDocument(
                id=doc_id,
                text=text,
                gold_label=-1 if label == _NO_LABEL else label,
                spans=tuple(spans) if spans else None,
            )
        )
    if len(view):
        raise CorruptArtifactError(f"{path}: trailing bytes after last record")
    return docs, _KIND_NAMES[kind_code]


LABELS_FILE = "labels.txt"


def write_split_artifacts(split: DatasetSplit, out_dir: Path) -> dict[str, Path]:
    """Persist all three splits plus the label-vocabulary sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name in SPLIT_NAMES:
        path = out_dir / f"{name}.bin"
        write_split_file(split.split(name), split.kind, path)
        written[name] = path
    labels_path = out_dir / LABELS_FILE
    labels_path.write_text(
        "".join(json.dumps(n, ensure_ascii=False) + "\n" for n in split.label_names),
        encoding="utf-8",
    )
    written["labels"] = labels_path
    return written


def read_split_artifacts(in_dir: Path) -> DatasetSplit:
    in_dir = Path(in_dir)
    parts: dict[str, list[AnnotatedDocument]] = {}
    kinds = set()
    for name in SPLIT_NAMES:
        docs, kind = read_split_file(in_dir / f"{name}.bin")
        parts[name] = docs
        kinds.add(kind)
    if len(kinds) != 1:
        raise CorruptArtifactError(f"{in_dir}: splits disagree on task kind")
    labels_path = in_dir / LABELS_FILE
    if not labels_path.is_file():
        raise CorruptArtifactError(f"{labels_path}: label vocabulary sidecar missing")
    label_names = tuple(
        json.loads(line)
        for line in labels_path.read_text(encoding="utf-8").splitlines()
        if line
    )
    return DatasetSplit(
        train=tuple(parts["train"]),
        dev=tuple(parts["dev"]),
        test=tuple(parts["test"]),
        label_names=label_names,
        kind=kinds.pop(),
    )


# ---------------------------------------------------------------------------
# Annotation state
# ---------------------------------------------------------------------------


@dataclass
class AnnotationState:
    """Partition of the train pool into labeled and unlabeled ids.

    The labeled side preserves proposal order, so the concatenation of all
    proposed batches is recoverable for auditing. Owned by exactly one seed
    run; not safe to share.
    """

    labeled_order: list[int] = field(default_factory=list)
    _labeled: set[int] = field(default_factory=set)
    _unlabeled: set[int] = field(default_factory=set)

    @classmethod
    def fresh(cls, train_ids: Iterable[int]) -> "AnnotationState":
        return cls(_unlabeled=set(train_ids))

    @classmethod
    def from_labeled_order(
        cls, train_ids: Iterable[int], labeled_order: Sequence[int]
    ) -> "AnnotationState":
        state = cls.fresh(train_ids)
        state.mark_labeled(labeled_order)
        return state

    @property
    def labeled_count(self) -> int:
        return len(self.labeled_order)

    @property
    def unlabeled_count(self) -> int:
        return len(self._unlabeled)

    def unlabeled_sorted(self) -> list[int]:
        return sorted(self._unlabeled)

    def is_labeled(self, doc_id: int) -> bool:
        return doc_id in self._labeled

    def mark_labeled(self, ids: Sequence[int]) -> "AnnotationState":
        """Move ``ids`` to the labeled set, appended in the given order."""
        seen: set[int] = set()
        for doc_id in ids:
            if doc_id in seen:
                raise DataError(f"duplicate id {doc_id} in one proposal batch")
            if doc_id in self._labeled:
                raise DataError(f"id {doc_id} is already labeled")
            if doc_id not in self._unlabeled:
                raise DataError(f"id {doc_id} is not part of the train pool")
            seen.add(doc_id)
        for doc_id in ids:
            self._unlabeled.remove(doc_id)
            self._labeled.add(doc_id)
            self.labeled_order.append(doc_id)
        return self
