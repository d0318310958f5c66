"""Rationale-augmented automated essay scoring toolkit."""

from .corpus import (
    EssayRecord,
    ScoreHistogram,
    SplitAssignment,
    length_stats,
    load_corpus,
    score_distribution,
    split,
)
from .ensemble import (
    EnsembleOutput,
    EnsembleSpec,
    PredictionSet,
    STRATEGIES,
    finalize,
)
from .metrics import (
    BinaryCounts,
    EvalReport,
    binary_kappa,
    confusion,
    per_class_prf,
    qwk,
    spearman,
)
from .numerics import ClosedFormRidge, cv_select_alpha, ridge_fit, weighted_median
from .prompting import PromptConfig, build_prompt, parse_response

__version__ = "0.1.0"

__all__ = [
    "EssayRecord",
    "ScoreHistogram",
    "SplitAssignment",
    "length_stats",
    "load_corpus",
    "score_distribution",
    "split",
    "EnsembleOutput",
    "EnsembleSpec",
    "PredictionSet",
    "STRATEGIES",
    "finalize",
    "BinaryCounts",
    "EvalReport",
    "binary_kappa",
    "confusion",
    "per_class_prf",
    "qwk",
    "spearman",
    "ClosedFormRidge",
    "cv_select_alpha",
    "ridge_fit",
    "weighted_median",
    "PromptConfig",
    "build_prompt",
    "parse_response",
]
