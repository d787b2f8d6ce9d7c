"""Experiment configuration: parsing, validation, and fingerprinting.

A configuration is a hierarchical YAML file with five sections: ``data``,
``experiment``, ``teacher``, ``trainer``, and ``tracking``. A file may pull
in fragment files through a top-level ``include`` list (composition depth is
capped at 4); later includes and the including file itself override earlier
values key by key. Any leaf can also be overridden from the command line
with ``--set section.field=value``.

Fingerprints are computed over a canonical serialization (sorted keys,
UTF-8, floats rendered with 17 significant digits) so they are stable
across key order, process restarts, and platforms. The ``tracking`` section
never participates in a fingerprint: where results are stored must not
change what gets computed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import yaml

from .errors import ConfigError

MAX_INCLUDE_DEPTH = 4

SUPPORTED_TRACKING_METRICS = ("macro_f1",)


@dataclass(frozen=True)
class DataConfig:
    """Location and field conventions of the raw JSONL dataset."""

    source_path: str
    text_field: str = "text"
    label_field: str = "label"
    train_file: str = "train.jsonl"
    dev_file: str = "dev.jsonl"
    test_file: str = "test.jsonl"


@dataclass(frozen=True)
class ExperimentSection:
    """Parameters of the simulated annotation loop."""

    step_size: int = 100
    initial_ratio: float = 0.05
    budget: int = 100
    tracking_metric: str = "macro_f1"
    seeds: tuple[int, ...] = (42, 4711, 768, 4656, 32213)
    max_steps: int | None = None
    stop_threshold: float | None = None


@dataclass(frozen=True)
class TeacherConfig:
    """Query-strategy selection for proposal and cold start."""

    strategy: str = "random"
    k: int | None = None
    initial_strategy: str = "random"


@dataclass(frozen=True)
class TrainerConfig:
    """Hyperparameters of the online linear classifier and its features."""

    learning_rate: float = 0.5
    epochs_per_step: int = 3
    l2_penalty: float = 1e-4
    ngram_order: int = 1
    vocab_size: int | None = 50000


@dataclass(frozen=True)
class TrackingConfig:
    """Run-store location, concurrency, and the recorded code revision."""

    revision: str
    store_root: str = "runs"
    worker_count: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, immutable parameterization of one experiment.

    ``base_dir`` records where the config file lived so relative paths
    (``data.source_path``, ``tracking.store_root``) can be resolved later;
    it is excluded from equality, serialization, and fingerprints.
    """

    data: DataConfig
    experiment: ExperimentSection
    teacher: TeacherConfig
    trainer: TrainerConfig
    tracking: TrackingConfig
    base_dir: Path | None = field(default=None, compare=False)

    def resolve_source_path(self) -> Path:
        return _resolve(self.data.source_path, self.base_dir)

    def resolve_store_root(self) -> Path:
        return _resolve(self.tracking.store_root, self.base_dir)


def _resolve(raw: str, base_dir: Path | None) -> Path:
    p = Path(raw)
    if not p.is_absolute() and base_dir is not None:
        return (base_dir / p).resolve()
    return p.resolve()


_SECTIONS = {
    "data": DataConfig,
    "experiment": ExperimentSection,
    "teacher": TeacherConfig,
    "trainer": TrainerConfig,
    "tracking": TrackingConfig,
}

# Sections that define what an experiment computes; the complement
# (tracking) only says where results go and who ran it.
FINGERPRINT_SECTIONS = ("data", "experiment", "teacher", "trainer")


# ---------------------------------------------------------------------------
# File loading and composition
# ---------------------------------------------------------------------------


def _load_yaml_mapping(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        loaded = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must contain a mapping at top level")
    return loaded


def _deep_merge(base: dict, override: Mapping) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if key in merged and isinstance(merged[key], dict) and isinstance(value, Mapping):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _compose_file(path: Path, depth: int) -> dict:
    if depth > MAX_INCLUDE_DEPTH:
        raise ConfigError(
            f"include depth exceeds {MAX_INCLUDE_DEPTH} at {path} "
            "(include chains are capped)"
        )
    raw = _load_yaml_mapping(path)
    includes = raw.pop("include", [])
    if isinstance(includes, str):
        includes = [includes]
    if not isinstance(includes, list) or not all(isinstance(i, str) for i in includes):
        raise ConfigError(f"include: must be a path or list of paths in {path}")
    composed: dict = {}
    for inc in includes:
        inc_path = (path.parent / inc).resolve()
        composed = _deep_merge(composed, _compose_file(inc_path, depth + 1))
    return _deep_merge(composed, raw)


def parse_override(assignment: str) -> tuple[str, Any]:
    """Split a ``key.path=value`` assignment; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key.path=value")
    key, _, value_text = assignment.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"override {assignment!r} has an empty key path")
    try:
        value = yaml.safe_load(value_text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override value for {key} is not valid YAML: {exc}") from exc
    return key, value


def _apply_override(tree: dict, key_path: str, value: Any) -> None:
    parts = key_path.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override path {key_path} descends into scalar {part!r}")
        node = child
    node[parts[-1]] = value


def parse_config(
    path: str | Path, overrides: Iterable[str] = ()
) -> ExperimentConfig:
    """Load, compose, override, and validate a config file."""
    path = Path(path)
    tree = _compose_file(path.resolve(), depth=1)
    for assignment in overrides:
        key, value = parse_override(assignment)
        _apply_override(tree, key, value)
    return config_from_dict(tree, base_dir=path.resolve().parent)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _type_name(value: Any) -> str:
    return type(value).__name__


def _check_int(path: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {_type_name(value)}")
    return value


def _check_float(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {_type_name(value)}")
    return float(value)


def _check_str(path: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {_type_name(value)}")
    return value


def _section_dict(tree: Mapping, name: str) -> dict:
    value = tree.get(name, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"{name}: expected a mapping, got {_type_name(value)}")
    return dict(value)


def _reject_unknown(section: str, given: Mapping, allowed: Sequence[str]) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{section}.{unknown[0]}: unknown key (allowed: {', '.join(allowed)})"
        )


def config_from_dict(tree: Mapping, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a nested plain dict and build a typed config from it."""
    if not isinstance(tree, Mapping):
        raise ConfigError("config must be a mapping of sections")
    unknown = sorted(set(tree) - set(_SECTIONS))
    if unknown:
        raise ConfigError(
            f"{unknown[0]}: unknown section (allowed: {', '.join(_SECTIONS)})"
        )

    data_d = _section_dict(tree, "data")
    exp_d = _section_dict(tree, "experiment")
    teach_d = _section_dict(tree, "teacher")
    train_d = _section_dict(tree, "trainer")
    track_d = _section_dict(tree, "tracking")
    for name, section in (
        ("data", data_d),
        ("experiment", exp_d),
        ("teacher", teach_d),
        ("trainer", train_d),
        ("tracking", track_d),
    ):
        _reject_unknown(name, section, [f.name for f in fields(_SECTIONS[name])])

    # data
    if "source_path" not in data_d:
        raise ConfigError("data.source_path: required field is missing")
    data = DataConfig(
        source_path=_check_str("data.source_path", data_d["source_path"]),
        text_field=_check_str("data.text_field", data_d.get("text_field", "text")),
        label_field=_check_str("data.label_field", data_d.get("label_field", "label")),
        train_file=_check_str("data.train_file", data_d.get("train_file", "train.jsonl")),
        dev_file=_check_str("data.dev_file", data_d.get("dev_file", "dev.jsonl")),
        test_file=_check_str("data.test_file", data_d.get("test_file", "test.jsonl")),
    )

    # experiment
    step_size = _check_int("experiment.step_size", exp_d.get("step_size", 100))
    if step_size < 1:
        raise ConfigError(f"experiment.step_size: must be >= 1, got {step_size}")
    budget = _check_int("experiment.budget", exp_d.get("budget", step_size))
    if budget < step_size:
        raise ConfigError(
            f"experiment.budget: must be >= step_size ({step_size}), got {budget}"
        )
    initial_ratio = _check_float(
        "experiment.initial_ratio", exp_d.get("initial_ratio", 0.05)
    )
    if not (0.0 <= initial_ratio < 1.0):
        raise ConfigError(
            f"experiment.initial_ratio: must lie in [0, 1), got {initial_ratio}"
        )
    metric = _check_str(
        "experiment.tracking_metric", exp_d.get("tracking_metric", "macro_f1")
    )
    if metric not in SUPPORTED_TRACKING_METRICS:
        raise ConfigError(
            f"experiment.tracking_metric: unsupported metric {metric!r} "
            f"(supported: {', '.join(SUPPORTED_TRACKING_METRICS)})"
        )
    seeds_raw = exp_d.get("seeds", [42, 4711, 768, 4656, 32213])
    if not isinstance(seeds_raw, (list, tuple)) or not seeds_raw:
        raise ConfigError("experiment.seeds: must be a non-empty list of integers")
    seeds = tuple(_check_int(f"experiment.seeds[{i}]", s) for i, s in enumerate(seeds_raw))
    if len(set(seeds)) != len(seeds):
        raise ConfigError("experiment.seeds: seeds must be pairwise distinct")
    max_steps = exp_d.get("max_steps")
    if max_steps is not None:
        max_steps = _check_int("experiment.max_steps", max_steps)
        if max_steps < 1:
            raise ConfigError(f"experiment.max_steps: must be >= 1, got {max_steps}")
    stop_threshold = exp_d.get("stop_threshold")
    if stop_threshold is not None:
        stop_threshold = _check_float("experiment.stop_threshold", stop_threshold)
    experiment = ExperimentSection(
        step_size=step_size,
        initial_ratio=initial_ratio,
        budget=budget,
        tracking_metric=metric,
        seeds=seeds,
        max_steps=max_steps,
        stop_threshold=stop_threshold,
    )

    # teacher
    k = teach_d.get("k")
    if k is not None:
        k = _check_int("teacher.k", k)
        if k < 1:
            raise ConfigError(f"teacher.k: must be >= 1, got {k}")
    teacher = TeacherConfig(
        strategy=_check_str("teacher.strategy", teach_d.get("strategy", "random")),
        k=k,
        initial_strategy=_check_str(
            "teacher.initial_strategy", teach_d.get("initial_strategy", "random")
        ),
    )

    # trainer
    learning_rate = _check_float(
        "trainer.learning_rate", train_d.get("learning_rate", 0.5)
    )
    if learning_rate <= 0:
        raise ConfigError(f"trainer.learning_rate: must be > 0, got {learning_rate}")
    epochs = _check_int("trainer.epochs_per_step", train_d.get("epochs_per_step", 3))
    if epochs < 1:
        raise ConfigError(f"trainer.epochs_per_step: must be >= 1, got {epochs}")
    l2 = _check_float("trainer.l2_penalty", train_d.get("l2_penalty", 1e-4))
    if l2 < 0:
        raise ConfigError(f"trainer.l2_penalty: must be >= 0, got {l2}")
    ngram = _check_int("trainer.ngram_order", train_d.get("ngram_order", 1))
    if not (1 <= ngram <= 3):
        raise ConfigError(f"trainer.ngram_order: must lie in 1..3, got {ngram}")
    vocab_size = train_d.get("vocab_size", 50000)
    if vocab_size is not None:
        vocab_size = _check_int("trainer.vocab_size", vocab_size)
        if vocab_size < 1:
            raise ConfigError(f"trainer.vocab_size: must be >= 1 or null, got {vocab_size}")
    trainer = TrainerConfig(
        learning_rate=learning_rate,
        epochs_per_step=epochs,
        l2_penalty=l2,
        ngram_order=ngram,
        vocab_size=vocab_size,
    )

    # tracking
    if "revision" not in track_d:
        raise ConfigError("tracking.revision: required field is missing")
    revision = _check_str("tracking.revision", track_d["revision"])
    if not revision:
        raise ConfigError("tracking.revision: must be a non-empty string")
    worker_count = _check_int(
        "tracking.worker_count", track_d.get("worker_count", 1)
    )
    if worker_count < 1:
        raise ConfigError(f"tracking.worker_count: must be >= 1, got {worker_count}")
    tracking = TrackingConfig(
        revision=revision,
        store_root=_check_str("tracking.store_root", track_d.get("store_root", "runs")),
        worker_count=worker_count,
    )

    return ExperimentConfig(
        data=data,
        experiment=experiment,
        teacher=teacher,
        trainer=trainer,
        tracking=tracking,
        base_dir=base_dir,
    )


# ---------------------------------------------------------------------------
# Serialization and fingerprints
# ---------------------------------------------------------------------------


def to_dict(cfg: ExperimentConfig) -> dict:
    """Nested plain-dict form of the config (``base_dir`` excluded)."""
    out: dict = {}
    for name, section_cls in _SECTIONS.items():
        section = getattr(cfg, name)
        out[name] = {
            f.name: _plain(getattr(section, f.name)) for f in fields(section_cls)
        }
    return out


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return list(value)
    return value


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize back to YAML; parsing the result yields an equal config."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)


def canonical_dumps(value: Any) -> str:
    """Render a config tree canonically: sorted keys, 17-digit floats."""
    parts: list[str] = []
    _canonical(value, parts)
    return "".join(parts)


def _canonical(value: Any, parts: list[str]) -> None:
    if value is None:
        parts.append("null")
    elif isinstance(value, bool):
        parts.append("true" if value else "false")
    elif isinstance(value, int):
        parts.append(repr(value))
    elif isinstance(value, float):
        parts.append(format(value, ".17g"))
    elif isinstance(value, str):
        parts.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(value):
            if i:
                parts.append(",")
            _canonical(item, parts)
        parts.append("]")
    elif isinstance(value, Mapping):
        parts.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                parts.append(",")
            parts.append(json.dumps(str(key), ensure_ascii=False))
            parts.append(":")
            _canonical(value[key], parts)
        parts.append("}")
    else:
        raise ConfigError(f"cannot canonicalize value of type {_type_name(value)}")


def fingerprint_subtree(cfg: ExperimentConfig, sections: Sequence[str]) -> str:
    """Digest over the named config sections only."""
    tree = to_dict(cfg)
    subset = {name: tree[name] for name in sections}
    canon = canonical_dumps(subset)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def config_fingerprint(cfg: ExperimentConfig) -> str:
    """Digest identifying what the experiment computes.

    Covers every section except ``tracking``: two configs that differ only
    in store location, worker count, or revision describe the same
    computation (revision participates in run matching separately).
    """
    return fingerprint_subtree(cfg, FINGERPRINT_SECTIONS)
