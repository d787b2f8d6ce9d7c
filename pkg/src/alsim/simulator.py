"""The simulated annotation loop and the multi-seed experiment driver.

One seed run replays the full cycle against a perfect oracle: a cold-start
strategy picks the initial training set, the oracle annotates it by gold
lookup, the model trains and is evaluated on dev (teacher-facing) and then
test (the comparison metric). Then, until the pool runs dry or a stop
condition fires: the teacher proposes a batch (step size and budget clamped
to the remaining pool), the oracle annotates, the model warm-start trains
on everything labeled so far, both evaluations run, and the teacher's
``after_train`` hook fires. Every step is persisted (checkpoint plus state)
so an interrupted run resumes exactly where it stopped and finishes with a
curve identical to an uninterrupted one.

``run_experiment`` executes one such run per configured seed through a
bounded worker pool, then aggregates the curves. All randomness derives
from (config fingerprint, seed, component tag), so results do not depend
on scheduling.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import ExperimentConfig, config_fingerprint, fingerprint_subtree, to_dict
from .corpus import (
    CLASSIFICATION,
    AnnotationState,
    DatasetSplit,
    convert_raw,
    read_split_artifacts,
    write_split_artifacts,
)
from .errors import (
    AlsimError,
    CorruptArtifactError,
    DataError,
    InterruptedRunError,
    SpanTasksUnsupportedError,
)
from .featurize import TfidfFeaturizer, write_vocabulary
from .seeding import derive_rng
from .teachers import BaseTeacher, CorpusView, Predictor, ProposeContext, create_teacher
from .tracking import (
    STATUS_RUNNING,
    STATUS_SUCCESS,
    AggregateCurve,
    RunRecord,
    RunStore,
    aggregate_seed_runs,
    atomic_write,
    csv_bytes_to_rows,
    rows_to_csv_bytes,
    write_band_plot,
)
from . import trainer as trainer_mod

logger = logging.getLogger(__name__)

STATE_FILE = "state.json"
CHECKPOINT_FILE = "checkpoint.bin"
CURVE_FILE = "curve.csv"
VOCABULARY_FILE = "vocabulary.txt"

SEED_RUN_SECTIONS = ("data", "experiment", "teacher", "trainer")

# Test seam: called as hook(seed, step_index) after each persisted step.
_post_step_hook: Callable[[int, int], None] | None = None


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    """Evaluation snapshot after one step; step 0 is the initial training."""

    step_index: int
    labeled_count: int
    dev_report: trainer_mod.EvaluationReport
    test_report: trainer_mod.EvaluationReport

    def metrics(self) -> dict[str, float]:
        return {
            "dev_macro_f1": self.dev_report.macro_f1,
            "test_macro_f1": self.test_report.macro_f1,
        }

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "labeled_count": self.labeled_count,
            "dev": self.dev_report.to_dict(),
            "test": self.test_report.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CurvePoint":
        return cls(
            step_index=payload["step_index"],
            labeled_count=payload["labeled_count"],
            dev_report=trainer_mod.EvaluationReport.from_dict(payload["dev"]),
            test_report=trainer_mod.EvaluationReport.from_dict(payload["test"]),
        )


@dataclass(frozen=True)
class LearningCurve:
    seed: int
    points: tuple[CurvePoint, ...]

    def rows(self) -> list[tuple[int, int, str, float]]:
        rows = []
        for point in self.points:
            for metric, value in sorted(point.metrics().items()):
                rows.append((point.step_index, point.labeled_count, metric, value))
        return rows


# ---------------------------------------------------------------------------
# Experiment assets (shared, read-only)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentAssets:
    split: DatasetSplit
    featurizer: TfidfFeaturizer
    X_train: object
    X_dev: object
    X_test: object
    y_train: np.ndarray
    y_dev: np.ndarray
    y_test: np.ndarray
    train_ids: np.ndarray
    gold_by_id: dict[int, int]
    label_names: tuple[str, ...]
    fingerprint: str


def build_assets(cfg: ExperimentConfig, split: DatasetSplit) -> ExperimentAssets:
    """Fit the feature space once on the full train split, vectorize all."""
    if split.kind != CLASSIFICATION:
        raise SpanTasksUnsupportedError(
            "span tasks unsupported: only classification corpora can be simulated"
        )
    featurizer = TfidfFeaturizer(
        ngram_order=cfg.trainer.ngram_order, max_vocab=cfg.trainer.vocab_size
    )
    train_texts = [d.text for d in split.train]
    featurizer.fit(train_texts)
    X_train = featurizer.transform(train_texts)
    X_dev = featurizer.transform([d.text for d in split.dev])
    X_test = featurizer.transform([d.text for d in split.test])
    return ExperimentAssets(
        split=split,
        featurizer=featurizer,
        X_train=X_train,
        X_dev=X_dev,
        X_test=X_test,
        y_train=np.asarray([d.gold_label for d in split.train], dtype=np.int64),
        y_dev=np.asarray([d.gold_label for d in split.dev], dtype=np.int64),
        y_test=np.asarray([d.gold_label for d in split.test], dtype=np.int64),
        train_ids=np.asarray([d.id for d in split.train], dtype=np.int64),
        gold_by_id={d.id: d.gold_label for d in split.train},
        label_names=split.label_names,
        fingerprint=config_fingerprint(cfg),
    )


def oracle_annotate(assets: ExperimentAssets, ids: Sequence[int]) -> list[int]:
    """Perfect oracle: exact gold-label lookup, train pool only."""
    labels = []
    for doc_id in ids:
        if doc_id not in assets.gold_by_id:
            raise DataError(f"id {doc_id} is not in the train pool")
        labels.append(assets.gold_by_id[doc_id])
    return labels


# ---------------------------------------------------------------------------
# Conversion pipeline steps
# ---------------------------------------------------------------------------


def ensure_converted(cfg: ExperimentConfig, store: RunStore) -> DatasetSplit:
    """Run (or skip via cache) load_raw, convert, and load_converted."""
    data_fp = fingerprint_subtree(cfg, ("data",))
    revision = cfg.tracking.revision
    data_params = {"data": to_dict(cfg)["data"]}

    raw_rec = store.find_matching_run("load_raw", data_fp, revision)
    if raw_rec is None or raw_rec.status != STATUS_SUCCESS:
        raw_rec = store.start_run("load_raw", data_fp, revision, data_params)
        source = cfg.resolve_source_path()
        for filename in (cfg.data.train_file, cfg.data.dev_file, cfg.data.test_file):
            src = source / filename
            if not src.is_file():
                store.set_status(raw_rec, "failed")
                raise FileNotFoundError(f"split file not found: {src}")
            store.add_artifact_file(raw_rec, filename, src)
        store.set_status(raw_rec, STATUS_SUCCESS)
        store.log_event(raw_rec.run_id, "executed")
    else:
        store.log_event(raw_rec.run_id, "cache_hit")

    conv_rec = store.find_matching_run("convert", data_fp, revision)
    if conv_rec is None or conv_rec.status != STATUS_SUCCESS:
        conv_rec = store.start_run("convert", data_fp, revision, data_params)
        try:
            split = convert_raw(raw_rec.artifacts_dir, cfg)
            written = write_split_artifacts(split, conv_rec.artifacts_dir)
            for name, path in written.items():
                store.register_artifact(conv_rec, path.name, path)
        except Exception:
            store.set_status(conv_rec, "failed")
            raise
        store.set_status(conv_rec, STATUS_SUCCESS)
        store.log_event(conv_rec.run_id, "executed")
    else:
        store.log_event(conv_rec.run_id, "cache_hit")

    lc_rec = store.find_matching_run("load_converted", data_fp, revision)
    if lc_rec is None or lc_rec.status != STATUS_SUCCESS:
        lc_rec = store.start_run("load_converted", data_fp, revision, data_params)
        store.set_status(lc_rec, STATUS_SUCCESS)
        store.log_event(lc_rec.run_id, "executed")
    else:
        store.log_event(lc_rec.run_id, "cache_hit")

    # Digest-verify the converted artifacts before loading them.
    for name in ("train.bin", "dev.bin", "test.bin", "labels.txt"):
        store.artifact_path(conv_rec, name, verify=True)
    return read_split_artifacts(conv_rec.artifacts_dir)


# ---------------------------------------------------------------------------
# One seed run
# ---------------------------------------------------------------------------


def _validate_proposal(
    proposal: Sequence[int], pool: set[int], expected_len: int
) -> None:
    if len(proposal) != expected_len:
        raise AlsimError(
            f"teacher contract violation: proposed {len(proposal)} ids, "
            f"expected {expected_len}"
        )
    if len(set(proposal)) != len(proposal):
        raise AlsimError("teacher contract violation: duplicate ids in proposal")
    if not set(proposal) <= pool:
        raise AlsimError("teacher contract violation: proposal outside the pool")


def _tracking_value(point: CurvePoint, metric: str) -> float:
    # Stop thresholds and strategy comparison read the test-side metric.
    if metric == "macro_f1":
        return point.test_report.macro_f1
    raise AlsimError(f"unsupported tracking metric {metric!r}")


def _check_interrupt(stop_event: threading.Event | None) -> None:
    if stop_event is not None and stop_event.is_set():
        raise InterruptedRunError("seed run interrupted before the next step")


class _SeedRun:
    """State machine for a single seed's simulation with persistence."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        assets: ExperimentAssets,
        seed: int,
        store: RunStore,
        record: RunRecord,
        stop_event: threading.Event | None = None,
    ):
        self.cfg = cfg
        self.assets = assets
        self.seed = seed
        self.store = store
        self.record = record
        self.stop_event = stop_event
        self.view = CorpusView(
            train_ids=assets.train_ids,
            train_matrix=assets.X_train,
            seed=seed,
            fingerprint=assets.fingerprint,
        )
        self.points: list[CurvePoint] = []
        self.batches: list[list[int]] = []
        self.stop_reason: str | None = None
        self.model: trainer_mod.LinearModel | None = None
        self._metric_keys = store.existing_metric_keys(record)

    # -- persistence -------------------------------------------------------

    def _state_payload(self) -> dict:
        return {
            "seed": self.seed,
            "points": [p.to_dict() for p in self.points],
            "batches": self.batches,
            "stop_reason": self.stop_reason,
        }

    def _persist(self) -> None:
        assert self.model is not None
        trainer_mod.store_checkpoint(
            self.model, self.record.artifacts_dir / CHECKPOINT_FILE
        )
        atomic_write(
            self.record.artifacts_dir / STATE_FILE,
            json.dumps(self._state_payload(), sort_keys=True).encode("utf-8"),
        )
        point = self.points[-1]
        for name, value in sorted(point.metrics().items()):
            key = (point.step_index, name)
            if key not in self._metric_keys:
                self.store.log_metric(self.record, point.step_index, name, value)
                self._metric_keys.add(key)
        if _post_step_hook is not None:
            _post_step_hook(self.seed, point.step_index)

    def _try_resume(self) -> None:
        state_path = self.record.artifacts_dir / STATE_FILE
        if not state_path.is_file():
            self.store.log_event(self.record.run_id, "restart")
            return
        try:
            payload = json.loads(state_path.read_text(encoding="utf-8"))
            model = trainer_mod.restore_checkpoint(
                self.record.artifacts_dir / CHECKPOINT_FILE
            )
            points = [CurvePoint.from_dict(p) for p in payload["points"]]
            expected_train_calls = sum(1 for p in points if p.labeled_count > 0)
            if model.step_counter != expected_train_calls:
                raise CorruptArtifactError(
                    f"checkpoint step counter {model.step_counter} does not match "
                    f"{expected_train_calls} recorded training steps"
                )
        except (CorruptArtifactError, json.JSONDecodeError, KeyError) as exc:
            logger.warning(
                "seed %d: cannot resume (%s); restarting from scratch", self.seed, exc
            )
            self.store.log_event(self.record.run_id, "restart_corrupt")
            return
        self.model = model
        self.points = points
        self.batches = [list(b) for b in payload["batches"]]
        self.stop_reason = payload.get("stop_reason")
        self.store.log_event(
            self.record.run_id, f"resume:{points[-1].step_index if points else -1}"
        )

    # -- steps ---------------------------------------------------------------

    def _train_on_labeled(self, ann: AnnotationState) -> None:
        rows = self.view.rows_for(np.asarray(ann.labeled_order, dtype=np.int64))
        trainer_mod.train_online(
            self.model,
            self.assets.X_train[rows],
            self.assets.y_train[rows],
            learning_rate=self.cfg.trainer.learning_rate,
            epochs=self.cfg.trainer.epochs_per_step,
            l2_penalty=self.cfg.trainer.l2_penalty,
        )

    def _evaluate_both(
        self, labeled_count: int
    ) -> tuple[trainer_mod.EvaluationReport, trainer_mod.EvaluationReport]:
        # Dev first (feeds the teacher), then test (the comparison metric).
        dev = trainer_mod.evaluate(
            self.model,
            self.assets.X_dev,
            self.assets.y_dev,
            self.assets.label_names,
            "dev",
            labeled_count,
        )
        self.store.log_event(self.record.run_id, f"eval_dev:{self._next_step}")
        test = trainer_mod.evaluate(
            self.model,
            self.assets.X_test,
            self.assets.y_test,
            self.assets.label_names,
            "test",
            labeled_count,
        )
        self.store.log_event(self.record.run_id, f"eval_test:{self._next_step}")
        return dev, test

    def _check_threshold(self, point: CurvePoint) -> None:
        threshold = self.cfg.experiment.stop_threshold
        if threshold is not None:
            value = _tracking_value(point, self.cfg.experiment.tracking_metric)
            if value >= threshold:
                self.stop_reason = "stop_threshold"

    def run(self) -> LearningCurve:
        self._try_resume()
        label_count = len(self.assets.label_names)
        if self.model is None:
            self.model = trainer_mod.LinearModel.zeros(
                label_count,
                self.assets.featurizer.vocabulary_.size,
                derive_rng(self.assets.fingerprint, self.seed, "trainer"),
            )
            self.points, self.batches, self.stop_reason = [], [], None

        ann = AnnotationState.from_labeled_order(
            self.assets.train_ids, [i for batch in self.batches for i in batch]
        )
        predictor = Predictor(self.model, self.view)
        teacher = create_teacher(
            self.cfg.teacher.strategy, self.cfg, self.view, label_count
        )
        if self.cfg.teacher.initial_strategy == self.cfg.teacher.strategy:
            initial_teacher = teacher
        else:
            initial_teacher = create_teacher(
                self.cfg.teacher.initial_strategy, self.cfg, self.view, label_count
            )

        if not self.points:
            self._run_initial_step(ann, predictor, teacher, initial_teacher)

        exp = self.cfg.experiment
        while self.stop_reason is None:
            if ann.unlabeled_count == 0:
                self.stop_reason = "pool_exhausted"
                break
            next_step = self.points[-1].step_index + 1
            if exp.max_steps is not None and next_step > exp.max_steps:
                self.stop_reason = "max_steps"
                break
            _check_interrupt(self.stop_event)
            self._run_propose_step(ann, predictor, teacher, next_step)

        # Record why the run ended alongside the final step's state.
        self._persist_final()
        return LearningCurve(seed=self.seed, points=tuple(self.points))

    @property
    def _next_step(self) -> int:
        return self.points[-1].step_index + 1 if self.points else 0

    def _run_initial_step(
        self,
        ann: AnnotationState,
        predictor: Predictor,
        teacher: BaseTeacher,
        initial_teacher: BaseTeacher,
    ) -> None:
        _check_interrupt(self.stop_event)
        exp = self.cfg.experiment
        n_train = len(self.assets.train_ids)
        initial_size = math.ceil(exp.initial_ratio * n_train)
        if initial_size > 0:
            pool = ann.unlabeled_sorted()
            # The configured budget can be smaller than the initial set;
            # the step<=budget<=pool invariant still must hold.
            budget = min(max(exp.budget, initial_size), len(pool))
            ctx = ProposeContext(
                potential_ids=pool,
                actual_step_size=initial_size,
                actual_budget=budget,
                predictor=predictor,
                strategy_rng=derive_rng(self.assets.fingerprint, self.seed, "initial"),
            )
            proposal = initial_teacher.propose(ctx)
            _validate_proposal(proposal, set(pool), initial_size)
            self.store.log_event(self.record.run_id, "propose:0")
            oracle_annotate(self.assets, proposal)
            self.store.log_event(self.record.run_id, "oracle:0")
            ann.mark_labeled(proposal)
            self.batches.append(list(proposal))
            self._train_on_labeled(ann)
            self.store.log_event(self.record.run_id, "train_step:0")
        dev, test = self._evaluate_both(ann.labeled_count)
        point = CurvePoint(
            step_index=0,
            labeled_count=ann.labeled_count,
            dev_report=dev,
            test_report=test,
        )
        self.points.append(point)
        teacher.after_initial_train(dev)
        self.store.log_event(self.record.run_id, "after_initial_train:0")
        self._check_threshold(point)
        self._persist()

    def _run_propose_step(
        self,
        ann: AnnotationState,
        predictor: Predictor,
        teacher: BaseTeacher,
        step_index: int,
    ) -> None:
        exp = self.cfg.experiment
        pool = ann.unlabeled_sorted()
        actual_step = min(exp.step_size, len(pool))
        actual_budget = min(exp.budget, len(pool))
        ctx = ProposeContext(
            potential_ids=pool,
            actual_step_size=actual_step,
            actual_budget=actual_budget,
            predictor=predictor,
            strategy_rng=derive_rng(
                self.assets.fingerprint, self.seed, "teacher", step_index
            ),
        )
        proposal = teacher.propose(ctx)
        _validate_proposal(proposal, set(pool), actual_step)
        self.store.log_event(self.record.run_id, f"propose:{step_index}")
        oracle_annotate(self.assets, proposal)
        self.store.log_event(self.record.run_id, f"oracle:{step_index}")
        ann.mark_labeled(proposal)
        self.batches.append(list(proposal))
        self._train_on_labeled(ann)
        self.store.log_event(self.record.run_id, f"train_step:{step_index}")
        dev, test = self._evaluate_both(ann.labeled_count)
        point = CurvePoint(
            step_index=step_index,
            labeled_count=ann.labeled_count,
            dev_report=dev,
            test_report=test,
        )
        self.points.append(point)
        teacher.after_train(dev)
        self.store.log_event(self.record.run_id, f"after_train:{step_index}")
        self._check_threshold(point)
        self._persist()

    def _persist_final(self) -> None:
        atomic_write(
            self.record.artifacts_dir / STATE_FILE,
            json.dumps(self._state_payload(), sort_keys=True).encode("utf-8"),
        )


def _seed_step_name(seed: int) -> str:
    return f"seed_run[{seed}]"


def _seed_run_params(cfg: ExperimentConfig, seed: int) -> dict:
    tree = to_dict(cfg)
    params = {name: tree[name] for name in SEED_RUN_SECTIONS}
    params["seed"] = seed
    return params


def _curve_from_record(
    store: RunStore, record: RunRecord, seed: int
) -> LearningCurve:
    state_path = store.artifact_path(record, STATE_FILE, verify=True)
    payload = json.loads(state_path.read_text(encoding="utf-8"))
    points = tuple(CurvePoint.from_dict(p) for p in payload["points"])
    return LearningCurve(seed=seed, points=points)


def run_seed(
    cfg: ExperimentConfig,
    assets: ExperimentAssets,
    seed: int,
    store: RunStore,
    stop_event: threading.Event | None = None,
) -> tuple[str, LearningCurve]:
    """Execute (or load, or resume) the seed run; returns (run id, curve)."""
    step_name = _seed_step_name(seed)
    record = store.find_matching_run(step_name, assets.fingerprint, cfg.tracking.revision)
    if record is not None and record.status == STATUS_SUCCESS:
        store.log_event(record.run_id, "cache_hit")
        return record.run_id, _curve_from_record(store, record, seed)
    if record is None:
        record = store.start_run(
            step_name, assets.fingerprint, cfg.tracking.revision,
            _seed_run_params(cfg, seed),
        )
    elif record.status != STATUS_RUNNING:
        store.set_status(record, STATUS_RUNNING)
    run = _SeedRun(cfg, assets, seed, store, record, stop_event)
    try:
        curve = run.run()
    except Exception:
        store.set_status(record, "failed")
        store.log_event(record.run_id, "failed")
        raise
    vocab_path = record.artifacts_dir / VOCABULARY_FILE
    write_vocabulary(assets.featurizer.vocabulary_, vocab_path)
    store.register_artifact(record, VOCABULARY_FILE, vocab_path)
    store.add_artifact_bytes(record, CURVE_FILE, rows_to_csv_bytes(curve.rows()))
    store.register_artifact(record, STATE_FILE, record.artifacts_dir / STATE_FILE)
    store.register_artifact(record, CHECKPOINT_FILE, record.artifacts_dir / CHECKPOINT_FILE)
    store.set_status(record, STATUS_SUCCESS)
    store.log_event(record.run_id, "finished")
    return record.run_id, curve


def resume_seed_run(
    cfg: ExperimentConfig, run_id: str, store: RunStore | None = None
) -> LearningCurve:
    """Explicitly resume one stored seed run under the same config."""
    store = store or RunStore(cfg.resolve_store_root())
    record = store.get_run(run_id)
    fingerprint = config_fingerprint(cfg)
    if record.fingerprint != fingerprint:
        raise AlsimError(
            f"fingerprint mismatch: run {run_id} was recorded for "
            f"{record.fingerprint[:12]}, current config is {fingerprint[:12]}"
        )
    seed = store.read_params(record)["seed"]
    split = ensure_converted(cfg, store)
    assets = build_assets(cfg, split)
    _, curve = run_seed(cfg, assets, seed, store)
    return curve


# ---------------------------------------------------------------------------
# Whole experiment
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    fingerprint: str
    curves: dict[int, LearningCurve]
    failures: dict[int, str]
    seed_run_ids: dict[int, str]
    aggregate: AggregateCurve | None
    aggregate_run_id: str | None

    @property
    def ok(self) -> bool:
        return not self.failures and self.aggregate is not None


def run_experiment(
    cfg: ExperimentConfig, store: RunStore | None = None
) -> ExperimentResult:
    """Convert (cached), run every seed (bounded concurrency), aggregate."""
    store = store or RunStore(cfg.resolve_store_root())
    split = ensure_converted(cfg, store)
    assets = build_assets(cfg, split)

    curves: dict[int, LearningCurve] = {}
    failures: dict[int, str] = {}
    run_ids: dict[int, str] = {}
    stop_event = threading.Event()
    try:
        with ThreadPoolExecutor(max_workers=cfg.tracking.worker_count) as pool:
            futures = {
                pool.submit(run_seed, cfg, assets, seed, store, stop_event): seed
                for seed in cfg.experiment.seeds
            }
            for future in as_completed(futures):
                seed = futures[future]
                try:
                    run_ids[seed], curves[seed] = future.result()
                except Exception as exc:
                    failures[seed] = f"{type(exc).__name__}: {exc}"
                    logger.error("seed %d failed: %s", seed, failures[seed])
    except KeyboardInterrupt:
        # Workers notice the event at their next step boundary, persist a
        # resumable failed state, and the pool drains before we re-raise.
        stop_event.set()
        raise

    if failures:
        logger.warning(
            "%d of %d seed runs failed; aggregation skipped, experiment is resumable",
            len(failures),
            len(cfg.experiment.seeds),
        )
        return ExperimentResult(
            fingerprint=assets.fingerprint,
            curves=curves,
            failures=failures,
            seed_run_ids=run_ids,
            aggregate=None,
            aggregate_run_id=None,
        )

    aggregate, agg_run_id = _ensure_aggregate(cfg, store, assets.fingerprint, curves)
    return ExperimentResult(
        fingerprint=assets.fingerprint,
        curves=curves,
        failures={},
        seed_run_ids=run_ids,
        aggregate=aggregate,
        aggregate_run_id=agg_run_id,
    )


def _ensure_aggregate(
    cfg: ExperimentConfig,
    store: RunStore,
    fingerprint: str,
    curves: dict[int, LearningCurve],
) -> tuple[AggregateCurve, str]:
    revision = cfg.tracking.revision
    record = store.find_matching_run("aggregate", fingerprint, revision)
    if record is not None and record.status == STATUS_SUCCESS:
        store.log_event(record.run_id, "cache_hit")
        rows = csv_bytes_to_rows(
            store.artifact_path(record, "aggregate.csv").read_bytes()
        )
        return AggregateCurve.from_rows(rows), record.run_id
    record = store.start_run(
        "aggregate", fingerprint, revision, _seed_run_params(cfg, -1) | {"seed": None}
    )
    try:
        aggregate = aggregate_seed_runs(
            [curves[seed] for seed in cfg.experiment.seeds]
        )
        store.add_artifact_bytes(
            record, "aggregate.csv", rows_to_csv_bytes(aggregate.to_rows())
        )
        plot_path = record.artifacts_dir / "curve.svg"
        metric = f"test_{cfg.experiment.tracking_metric}"
        write_band_plot(
            [(cfg.teacher.strategy, aggregate)],
            metric,
            plot_path,
            title=f"{cfg.teacher.strategy}: mean with min-max band",
        )
        store.register_artifact(record, "curve.svg", plot_path)
        for point in aggregate.points:
            for name, stats in sorted(point.stats.items()):
                store.log_metric(
                    record, point.step_index, f"{name}_mean", stats["mean"]
                )
    except Exception:
        store.set_status(record, "failed")
        raise
    store.set_status(record, STATUS_SUCCESS)
    store.log_event(record.run_id, "executed")
    return aggregate, record.run_id
