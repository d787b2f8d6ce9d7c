"""Pool-based active-learning strategy evaluation by simulation.

The package replays the annotation loop against a perfect oracle (gold
labels from the dataset), trains an online linear classifier after every
propose step, and records seed-averaged learning curves in a file-based,
cached, resumable run store. Query strategies plug in through a small
propose contract and a registry; ``random``, ``kmeans`` (exploration), and
``margin`` (exploitation) ship by default.
"""

from .config import ExperimentConfig, config_fingerprint, parse_config
from .corpus import AnnotatedDocument, AnnotationState, DatasetSplit, convert_raw
from .featurize import TfidfFeaturizer, tokenize
from .cluster import KMeans
from .trainer import (
    EvaluationReport,
    LinearModel,
    evaluate,
    predict_proba,
    restore_checkpoint,
    store_checkpoint,
    train_online,
)
from .teachers import (
    BaseTeacher,
    CorpusView,
    ProposeContext,
    available_strategies,
    margin_score,
    register_teacher,
)
from .simulator import (
    CurvePoint,
    ExperimentResult,
    LearningCurve,
    run_experiment,
    run_seed,
)
from .tracking import RunStore, aggregate_seed_runs
from .synthetic import make_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDocument",
    "AnnotationState",
    "BaseTeacher",
    "CorpusView",
    "CurvePoint",
    "DatasetSplit",
    "EvaluationReport",
    "ExperimentConfig",
    "ExperimentResult",
    "KMeans",
    "LearningCurve",
    "LinearModel",
    "ProposeContext",
    "RunStore",
    "TfidfFeaturizer",
    "aggregate_seed_runs",
    "available_strategies",
    "config_fingerprint",
    "convert_raw",
    "evaluate",
    "make_synthetic_dataset",
    "margin_score",
    "parse_config",
    "predict_proba",
    "register_teacher",
    "restore_checkpoint",
    "run_experiment",
    "run_seed",
    "store_checkpoint",
    "tokenize",
    "train_online",
]
