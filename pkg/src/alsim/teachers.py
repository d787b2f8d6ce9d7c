"""Query strategies: the propose contract and the three shipped teachers.

A teacher receives a :class:`ProposeContext` holding the unlabeled pool,
the clamped step size and budget, a prediction-only handle on the current
model, and a seeded generator. It returns the ids to annotate next. The
same contract serves cold start: the initial training set is selected by
whichever registered strategy the config names.

Shipped strategies:

* ``random`` — uniform sample without replacement; the baseline every
  other strategy is compared against.
* ``kmeans`` — exploration. Clusters the full train pool once (TF-IDF
  vectors, k-means, k defaulting to the label count) and proposes the
  unseen documents farthest from their own cluster center, on the
  assumption that those sit closest to class boundaries.
* ``margin`` — exploitation. Scores a budget-capped random sample with the
  current model and proposes the documents whose best and second-best
  class probabilities are closest together.

All ranking ties break by ascending document id so proposal sequences are
total-ordered and reproducible.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .cluster import KMeans
from .config import ExperimentConfig
from .errors import ConfigError
from .seeding import derive_rng
from . import trainer as trainer_mod


@dataclass(frozen=True)
class CorpusView:
    """Read-only slice of the train pool that strategies may inspect."""

    train_ids: np.ndarray  # sorted ascending; row i of train_matrix is train_ids[i]
    train_matrix: sparse.csr_matrix
    seed: int
    fingerprint: str

    def rows_for(self, ids: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.train_ids, ids)


class Predictor:
    """Prediction-only handle: teachers can score documents, never train."""

    def __init__(self, model: trainer_mod.LinearModel, view: CorpusView):
        self._model = model
        self._view = view

    def predict_proba(self, ids: Sequence[int]) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        rows = self._view.rows_for(ids)
        return trainer_mod.predict_proba(self._model, self._view.train_matrix[rows])


@dataclass
class ProposeContext:
    """Inputs of one propose call; sizes are pre-clamped by the simulator."""

    potential_ids: list[int]
    actual_step_size: int
    actual_budget: int
    predictor: Predictor
    strategy_rng: np.random.Generator = field(repr=False)


class BaseTeacher(abc.ABC):
    """Strategy interface; subclasses are constructed once per seed run."""

    def __init__(self, config: ExperimentConfig, view: CorpusView, label_count: int):
        self.config = config
        self.view = view
        self.label_count = label_count

    @abc.abstractmethod
    def propose(self, ctx: ProposeContext) -> list[int]:
        """Return ``ctx.actual_step_size`` distinct ids from the pool."""

    def after_initial_train(self, dev_report: trainer_mod.EvaluationReport) -> None:
        """Hook invoked once after the initial training; default no-op."""

    def after_train(self, dev_report: trainer_mod.EvaluationReport) -> None:
        """Hook invoked after every propose-step training; default no-op."""


TEACHER_REGISTRY: dict[str, type[BaseTeacher]] = {}


def register_teacher(name: str):
    """Class decorator adding a strategy to the registry under ``name``."""

    def decorate(cls: type[BaseTeacher]) -> type[BaseTeacher]:
        if name in TEACHER_REGISTRY:
            raise ValueError(f"strategy name {name!r} is already registered")
        TEACHER_REGISTRY[name] = cls
        return cls

    return decorate


def available_strategies() -> list[str]:
    return sorted(TEACHER_REGISTRY)


def create_teacher(
    name: str, config: ExperimentConfig, view: CorpusView, label_count: int
) -> BaseTeacher:
    try:
        cls = TEACHER_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"teacher.strategy: unknown strategy {name!r} "
            f"(registered: {', '.join(available_strategies())})"
        ) from None
    return cls(config, view, label_count)


# ---------------------------------------------------------------------------
# Margin confidence
# ---------------------------------------------------------------------------


def margin_score(probabilities: Sequence[float]) -> float:
    """Best minus second-best class probability; 0 is maximal uncertainty."""
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim != 1 or probs.shape[0] < 2:
        raise ValueError("margin requires a probability vector with >= 2 entries")
    top_two = np.partition(probs, -2)[-2:]
    return float(top_two[1] - top_two[0])


def margin_scores(probabilities: np.ndarray) -> np.ndarray:
    """Row-wise margin for a (n, labels) probability matrix."""
    if probabilities.ndim != 2 or probabilities.shape[1] < 2:
        raise ValueError("margin requires probability rows with >= 2 entries")
    top_two = np.partition(probabilities, -2, axis=1)[:, -2:]
    return top_two[:, 1] - top_two[:, 0]


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@register_teacher("random")
class RandomTeacher(BaseTeacher):
    """Uniform sample without replacement, in draw order."""

    def propose(self, ctx: ProposeContext) -> list[int]:
        ids = np.asarray(ctx.potential_ids, dtype=np.int64)
        picked = ctx.strategy_rng.choice(ids, size=ctx.actual_step_size, replace=False)
        return [int(i) for i in picked]


@register_teacher("kmeans")
class KMeansTeacher(BaseTeacher):
    """Cluster once, then always propose the pool's outermost documents.

    The clustering is fitted on the whole train pool at construction time
    and never updated: the strategy is purely exploration-based and takes
    no feedback from training. Known bias: a cluster with larger
    within-cluster spread contributes disproportionately many proposals,
    since distances are ranked globally rather than per cluster.
    """

    def __init__(self, config: ExperimentConfig, view: CorpusView, label_count: int):
        super().__init__(config, view, label_count)
        k = config.teacher.k if config.teacher.k is not None else label_count
        rng = derive_rng(view.fingerprint, view.seed, "teacher-init")
        self.kmeans_ = KMeans(n_clusters=k, rng=rng).fit(view.train_matrix)
        self._distance_by_row = self.kmeans_.point_center_distances_

    def propose(self, ctx: ProposeContext) -> list[int]:
        ids = np.asarray(ctx.potential_ids, dtype=np.int64)
        distances = self._distance_by_row[self.view.rows_for(ids)]
        order = np.lexsort((ids, -distances))
        return [int(i) for i in ids[order][: ctx.actual_step_size]]


@register_teacher("margin")
class MarginTeacher(BaseTeacher):
    """Propose the least-confident documents of a budget-capped sample."""

    def propose(self, ctx: ProposeContext) -> list[int]:
        ids = np.asarray(ctx.potential_ids, dtype=np.int64)
        sample = ctx.strategy_rng.choice(ids, size=ctx.actual_budget, replace=False)
        margins = margin_scores(ctx.predictor.predict_proba(sample))
        order = np.lexsort((sample, margins))
        return [int(i) for i in sample[order][: ctx.actual_step_size]]
