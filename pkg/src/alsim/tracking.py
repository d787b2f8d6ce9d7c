"""File-based run store: parameters, metrics, artifacts, caching, aggregation.

Every pipeline step (raw load, conversion, converted load, one seed run,
aggregation) is a *run* living in its own directory under ``<root>/runs/``,
keyed deterministically by (step name, fingerprint, revision). A success
record for a key is never recomputed: callers find it, verify artifact
digests, and load the stored result. A failed (or interrupted) record is
resumed in place.

Layout per run: ``params.json``, ``status``, ``metrics.csv`` (append-only
``step_index,name,value`` lines), ``artifacts/`` plus ``artifacts.json``
carrying a sha256 per artifact, verified on every load. A store-level
``events.log`` records step executions and cache hits; appends go through
an advisory file lock so concurrent seed runs never interleave.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from filelock import FileLock

from .errors import CorruptArtifactError, StoreError

STATUS_RUNNING = "running"
STATUS_SUCCESS = "success"
STATUS_FAILED = "failed"

_SLUG_RE = re.compile(r"[^A-Za-z0-9_.-]+")


def _slug(text: str) -> str:
    return _SLUG_RE.sub("_", text).strip("_") or "run"


def atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class ArtifactRef:
    name: str
    relpath: str
    sha256: str
    size: int


@dataclass
class RunRecord:
    run_id: str
    step_name: str
    fingerprint: str
    revision: str
    status: str
    path: Path

    @property
    def artifacts_dir(self) -> Path:
        return self.path / "artifacts"


class RunStore:
    """Append-only store of pipeline runs rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.runs_dir = self.root / "runs"
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self._events_path = self.root / "events.log"
        self._lock = FileLock(str(self.root / ".store.lock"))

    # -- identity ----------------------------------------------------------

    @staticmethod
    def run_id_for(step_name: str, fingerprint: str, revision: str) -> str:
        key = f"{step_name}\x1f{fingerprint}\x1f{revision}"
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]
        return f"{_slug(step_name)}-{digest}"

    # -- lifecycle ----------------------------------------------------------

    def find_matching_run(
        self, step_name: str, fingerprint: str, revision: str
    ) -> RunRecord | None:
        """Match a prior run of this step with identical parameters."""
        run_id = self.run_id_for(step_name, fingerprint, revision)
        path = self.runs_dir / run_id
        if not path.is_dir():
            return None
        return self._load_record(path)

    def start_run(
        self, step_name: str, fingerprint: str, revision: str, params: dict
    ) -> RunRecord:
        """Create (or reopen) the run directory for this key, status running."""
        run_id = self.run_id_for(step_name, fingerprint, revision)
        path = self.runs_dir / run_id
        with self._lock:
            path.mkdir(parents=True, exist_ok=True)
            (path / "artifacts").mkdir(exist_ok=True)
            payload = {
                "run_id": run_id,
                "step_name": step_name,
                "fingerprint": fingerprint,
                "revision": revision,
                "params": params,
            }
            atomic_write(
                path / "params.json",
                json.dumps(payload, indent=2, sort_keys=True).encode("utf-8"),
            )
            atomic_write(path / "status", STATUS_RUNNING.encode("utf-8"))
        return RunRecord(
            run_id=run_id,
            step_name=step_name,
            fingerprint=fingerprint,
            revision=revision,
            status=STATUS_RUNNING,
            path=path,
        )

    def _load_record(self, path: Path) -> RunRecord:
        try:
            payload = json.loads((path / "params.json").read_text(encoding="utf-8"))
            status = (path / "status").read_text(encoding="utf-8").strip()
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"unreadable run record at {path}: {exc}") from exc
        return RunRecord(
            run_id=payload["run_id"],
            step_name=payload["step_name"],
            fingerprint=payload["fingerprint"],
            revision=payload["revision"],
            status=status,
            path=path,
        )

    def get_run(self, run_id: str) -> RunRecord:
        path = self.runs_dir / run_id
        if not path.is_dir():
            raise StoreError(f"unknown run id {run_id!r}")
        return self._load_record(path)

    def list_runs(self) -> list[RunRecord]:
        return [
            self._load_record(p) for p in sorted(self.runs_dir.iterdir()) if p.is_dir()
        ]

    def set_status(self, record: RunRecord, status: str) -> None:
        if status not in (STATUS_RUNNING, STATUS_SUCCESS, STATUS_FAILED):
            raise StoreError(f"unknown status {status!r}")
        atomic_write(record.path / "status", status.encode("utf-8"))
        record.status = status

    def read_params(self, record: RunRecord) -> dict:
        payload = json.loads((record.path / "params.json").read_text(encoding="utf-8"))
        return payload["params"]

    # -- metrics -------------------------------------------------------------

    def log_metric(
        self, record: RunRecord, step_index: int, name: str, value: float
    ) -> None:
        with (record.path / "metrics.csv").open("a", encoding="utf-8") as handle:
            handle.write(f"{step_index},{name},{value!r}\n")

    def read_metrics(self, record: RunRecord) -> list[tuple[int, str, float]]:
        path = record.path / "metrics.csv"
        if not path.is_file():
            return []
        triples = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            step_text, name, value_text = line.split(",", 2)
            triples.append((int(step_text), name, float(value_text)))
        return triples

    def existing_metric_keys(self, record: RunRecord) -> set[tuple[int, str]]:
        return {(step, name) for step, name, _ in self.read_metrics(record)}

    # -- artifacts -----------------------------------------------------------

    def _artifact_index(self, record: RunRecord) -> dict:
        path = record.path / "artifacts.json"
        if not path.is_file():
            return {}
        return json.loads(path.read_text(encoding="utf-8"))

    def _write_artifact_index(self, record: RunRecord, index: dict) -> None:
        atomic_write(
            record.path / "artifacts.json",
            json.dumps(index, indent=2, sort_keys=True).encode("utf-8"),
        )

    def register_artifact(self, record: RunRecord, name: str, path: Path) -> ArtifactRef:
        """Record an artifact already placed inside the run's artifacts dir."""
        path = Path(path)
        try:
            rel = path.relative_to(record.path)
        except ValueError:
            raise StoreError(f"artifact {path} lies outside run dir {record.path}")
        ref = ArtifactRef(
            name=name,
            relpath=str(rel),
            sha256=_sha256_file(path),
            size=path.stat().st_size,
        )
        index = self._artifact_index(record)
        index[name] = {"relpath": ref.relpath, "sha256": ref.sha256, "size": ref.size}
        self._write_artifact_index(record, index)
        return ref

    def add_artifact_bytes(self, record: RunRecord, name: str, data: bytes) -> ArtifactRef:
        path = record.artifacts_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write(path, data)
        return self.register_artifact(record, name, path)

    def add_artifact_file(self, record: RunRecord, name: str, source: Path) -> ArtifactRef:
        data = Path(source).read_bytes()
        return self.add_artifact_bytes(record, name, data)

    def artifact_path(self, record: RunRecord, name: str, verify: bool = True) -> Path:
        index = self._artifact_index(record)
        if name not in index:
            raise CorruptArtifactError(
                f"run {record.run_id} has no artifact named {name!r}"
            )
        entry = index[name]
        path = record.path / entry["relpath"]
        if not path.is_file():
            raise CorruptArtifactError(f"artifact file missing: {path}")
        if verify and _sha256_file(path) != entry["sha256"]:
            raise CorruptArtifactError(f"artifact digest mismatch: {path}")
        return path

    def artifact_names(self, record: RunRecord) -> list[str]:
        return sorted(self._artifact_index(record))

    # -- events ---------------------------------------------------------------

    def log_event(self, run_id: str, event: str) -> None:
        with self._lock:
            with self._events_path.open("a", encoding="utf-8") as handle:
                handle.write(f"{run_id}\t{event}\n")

    def read_events(self) -> list[tuple[str, str]]:
        if not self._events_path.is_file():
            return []
        events = []
        for line in self._events_path.read_text(encoding="utf-8").splitlines():
            if line:
                run_id, _, event = line.partition("\t")
                events.append((run_id, event))
        return events


# ---------------------------------------------------------------------------
# Curve CSV rows
# ---------------------------------------------------------------------------

CSV_HEADER = "step_index,labeled_count,metric,value"

Row = tuple[int, int, str, float]


def rows_to_csv_bytes(rows: Iterable[Row]) -> bytes:
    lines = [CSV_HEADER]
    for step_index, labeled_count, metric, value in rows:
        lines.append(f"{step_index},{labeled_count},{metric},{float(value)!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def csv_bytes_to_rows(data: bytes) -> list[Row]:
    lines = data.decode("utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise CorruptArtifactError("curve CSV is missing its header line")
    rows: list[Row] = []
    for line in lines[1:]:
        if not line:
            continue
        step_text, count_text, metric, value_text = line.split(",", 3)
        rows.append((int(step_text), int(count_text), metric, float(value_text)))
    return rows


# ---------------------------------------------------------------------------
# Seed-run aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregatePoint:
    step_index: int
    labeled_count: int
    n_seeds: int
    stats: dict[str, dict[str, float]]  # metric -> {mean,min,max,std}


@dataclass(frozen=True)
class AggregateCurve:
    points: tuple[AggregatePoint, ...]

    def to_rows(self) -> list[Row]:
        rows: list[Row] = []
        for point in self.points:
            for metric in sorted(point.stats):
                for stat in ("mean", "min", "max", "std"):
                    rows.append(
                        (
                            point.step_index,
                            point.labeled_count,
                            f"{metric}_{stat}",
                            point.stats[metric][stat],
                        )
                    )
        return rows

    @classmethod
    def from_rows(cls, rows: Sequence[Row]) -> "AggregateCurve":
        by_step: dict[int, dict] = {}
        for step_index, labeled_count, metric_stat, value in rows:
            metric, _, stat = metric_stat.rpartition("_")
            entry = by_step.setdefault(
                step_index, {"labeled_count": labeled_count, "stats": {}}
            )
            entry["stats"].setdefault(metric, {})[stat] = value
        points = tuple(
            AggregatePoint(
                step_index=step,
                labeled_count=entry["labeled_count"],
                n_seeds=0,
                stats=entry["stats"],
            )
            for step, entry in sorted(by_step.items())
        )
        return cls(points=points)

    def mean_series(self, metric: str) -> tuple[list[int], list[float]]:
        xs = [p.labeled_count for p in self.points]
        ys = [p.stats[metric]["mean"] for p in self.points]
        return xs, ys

    def band_series(self, metric: str) -> tuple[list[float], list[float]]:
        lo = [p.stats[metric]["min"] for p in self.points]
        hi = [p.stats[metric]["max"] for p in self.points]
        return lo, hi


def aggregate_seed_runs(curves: Sequence) -> AggregateCurve:
    """Mean/min/max (and std) per step across seed runs.

    Curves are aligned by step index and must agree on the labeled count
    wherever they overlap; an early-stopped curve is a prefix and simply
    contributes to fewer points. The reported deviation is the min-max
    envelope; the standard deviation (population) is emitted alongside for
    downstream analysis but plots use min-max.
    """
    if not curves:
        raise ValueError("cannot aggregate zero seed runs")
    max_len = max(len(c.points) for c in curves)
    points: list[AggregatePoint] = []
    for i in range(max_len):
        active = [c for c in curves if len(c.points) > i]
        counts = {c.points[i].labeled_count for c in active}
        if len(counts) != 1:
            offenders = sorted(
                (c.seed, c.points[i].labeled_count) for c in active
            )
            raise ValueError(
                f"labeled-count grids disagree at step {i}: "
                + ", ".join(f"seed {s} has {n}" for s, n in offenders)
            )
        metric_names = sorted(active[0].points[i].metrics())
        stats: dict[str, dict[str, float]] = {}
        for metric in metric_names:
            values = [c.points[i].metrics()[metric] for c in active]
            mean = math.fsum(values) / len(values)
            var = math.fsum((v - mean) ** 2 for v in values) / len(values)
            stats[metric] = {
                "mean": mean,
                "min": min(values),
                "max": max(values),
                "std": math.sqrt(var),
            }
        points.append(
            AggregatePoint(
                step_index=i,
                labeled_count=counts.pop(),
                n_seeds=len(active),
                stats=stats,
            )
        )
    return AggregateCurve(points=tuple(points))


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------


def write_band_plot(
    series: Sequence[tuple[str, AggregateCurve]],
    metric: str,
    path: str | Path,
    title: str | None = None,
) -> Path:
    """Line chart of per-strategy means with min-max bands, saved as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, curve in series:
        xs, means = curve.mean_series(metric)
        lo, hi = curve.band_series(metric)
        (line,) = ax.plot(xs, means, marker="o", markersize=3, label=label)
        ax.fill_between(xs, lo, hi, alpha=0.2, color=line.get_color())
    ax.set_xlabel("labeled documents")
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
