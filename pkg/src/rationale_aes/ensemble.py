"""Seven blending strategies over member model predictions.

Each strategy is a small sklearn-style estimator: `fit` consumes the
member prediction sets (and, for stacking, validation truth) and
`predict` blends continuous member predictions per essay, finishing
with clip-to-[0,4] and half-up rounding. Weight fitting only ever sees
validation-split statistics; test truth is never an input here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .numerics import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_CV_FOLDS,
    ClosedFormRidge,
    cv_select_alpha,
    weighted_median,
)

__all__ = [
    "SOURCE_TAGS",
    "SCORE_MIN",
    "SCORE_MAX",
    "PredictionSet",
    "EnsembleOutput",
    "EnsembleSpec",
    "EnsembleError",
    "finalize",
    "member_weights_qwk",
    "ordered_members",
    "QwkOptimizedEnsemble",
    "EliteEnsemble",
    "WeightedMedianEnsemble",
    "ConfidenceWeightedEnsemble",
    "TieredEnsemble",
    "StackingEnsemble",
    "CorrelationOptimizedEnsemble",
    "STRATEGIES",
]

SOURCE_TAGS = ("essay", "rationale-A", "rationale-B")
SCORE_MIN, SCORE_MAX = 0.0, 4.0

# Fixed anchor weights for the elite strategy: the two strongest
# essay-based members keep 35% and 25% of the mass when present.
ELITE_ANCHORS = (
    (("essay", "electra-large"), 0.35),
    (("essay", "deberta-v3-large"), 0.25),
)


class EnsembleError(ValueError):
    """Strategy cannot be applied to the given members."""


@dataclass(frozen=True)
class PredictionSet:
    """One member model's continuous predictions, tagged by input source.

    `val_qwk` / `val_spearman` are the member's validation-split
    statistics; strategies use them for weighting so the test split
    never leaks into weight fitting.
    """

    model_id: str
    source_tag: str
    predictions: Mapping[int, float]
    val_qwk: float | None = None
    val_spearman: float | None = None

    def __post_init__(self):
        if self.source_tag not in SOURCE_TAGS:
            raise ValueError(f"unknown source_tag {self.source_tag!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.source_tag, self.model_id)

    def vector(self, essay_ids: Sequence[int]) -> np.ndarray:
        missing = [e for e in essay_ids if e not in self.predictions]
        if missing:
            raise EnsembleError(
                f"member {self.model_id} ({self.source_tag}) missing predictions "
                f"for essays {missing[:5]}{'...' if len(missing) > 5 else ''}"
            )
        v = np.asarray([self.predictions[e] for e in essay_ids], dtype=float)
        if not np.all(np.isfinite(v)):
            raise EnsembleError(f"member {self.model_id}: non-finite prediction")
        return np.clip(v, SCORE_MIN, SCORE_MAX)


@dataclass(frozen=True)
class EnsembleOutput:
    """Per-essay continuous blends, final integer scores, and fit audit."""

    blend: dict[int, float]
    final: dict[int, int]
    audit: dict = field(default_factory=dict)


def finalize(blend: float) -> int:
    """Clip to [0, 4], then round to the nearest integer, halves up."""
    if not math.isfinite(blend):
        raise ValueError(f"cannot finalize non-finite blend {blend!r}")
    clipped = min(max(blend, SCORE_MIN), SCORE_MAX)
    return int(math.floor(clipped + 0.5))


def ordered_members(members: Sequence[PredictionSet]) -> list[PredictionSet]:
    """Canonical (source_tag, model_id) member order used everywhere."""
    out = sorted(members, key=lambda m: m.key)
    keys = [m.key for m in out]
    if len(set(keys)) != len(keys):
        raise EnsembleError("duplicate (source_tag, model_id) among members")
    return out


def member_weights_qwk(members: Sequence[PredictionSet]) -> np.ndarray:
    """Exponential validation-QWK weights, normalized to sum 1.

    raw_i = exp(5 * (qwk_i - 0.8)); the steep exponent rewards strong
    members aggressively and shrinks weak ones toward zero.
    """
    if not members:
        raise EnsembleError("no members")
    qwks = _require_stat(members, "val_qwk")
    raw = np.exp(5.0 * (qwks - 0.8))
    return raw / raw.sum()


def _require_stat(members: Sequence[PredictionSet], name: str) -> np.ndarray:
    values = []
    for m in members:
        v = getattr(m, name)
        if v is None:
            raise EnsembleError(f"member {m.model_id} ({m.source_tag}) lacks {name}")
        values.append(v)
    return np.asarray(values, dtype=float)


def _output(essay_ids: Sequence[int], blend: np.ndarray, audit: dict) -> EnsembleOutput:
    blend_map = {e: float(b) for e, b in zip(essay_ids, blend)}
    return EnsembleOutput(
        blend=blend_map,
        final={e: finalize(b) for e, b in blend_map.items()},
        audit=audit,
    )


class _MemberEnsemble(BaseEstimator):
    """Shared fit plumbing: store canonically ordered members."""

    def fit(self, members: Sequence[PredictionSet], y=None, essay_ids=None):
        self.members_ = ordered_members(members)
        self._fit_weights()
        return self

    def _fit_weights(self) -> None:
        raise NotImplementedError

    def _matrix(self, essay_ids: Sequence[int]) -> np.ndarray:
        return np.column_stack([m.vector(essay_ids) for m in self.members_])

    def _audit(self) -> dict:
        return {
            "strategy": type(self).__name__,
            "member_order": [list(m.key) for m in self.members_],
            "weights": [float(w) for w in self.weights_],
        }


class QwkOptimizedEnsemble(_MemberEnsemble):
    """Weighted average under exponential validation-QWK weights."""

    def _fit_weights(self) -> None:
        self.weights_ = member_weights_qwk(self.members_)

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        blend = self._matrix(essay_ids) @ self.weights_
        return _output(essay_ids, blend, self._audit())


class EliteEnsemble(_MemberEnsemble):
    """Weighted average over members above a validation-QWK threshold.

    The two anchor members keep fixed 0.35/0.25 weights when present;
    the residual mass goes to the remaining elites by linear rank weight
    (rank r of R gets mass proportional to R - r + 1). With anchors only,
    their fixed weights are renormalized to sum 1.
    """

    def __init__(self, elite_threshold: float = 0.8):
        self.elite_threshold = elite_threshold

    def _fit_weights(self) -> None:
        if not 0.0 < self.elite_threshold < 1.0:
            raise EnsembleError(
                f"elite_threshold must be in (0, 1), got {self.elite_threshold}"
            )
        qwks = _require_stat(self.members_, "val_qwk")
        elites = [m for m, q in zip(self.members_, qwks) if q > self.elite_threshold]
        if not elites:
            raise EnsembleError(
                f"no member has validation QWK above {self.elite_threshold}"
            )
        anchor_weights = dict(ELITE_ANCHORS)
        fixed = {m.key: anchor_weights[m.key] for m in elites if m.key in anchor_weights}
        others = [m for m in elites if m.key not in fixed]
        weights: dict[tuple[str, str], float] = dict(fixed)
        residual = 1.0 - sum(fixed.values())
        if others:
            # Rank by validation QWK, best first; ties keep canonical order.
            ranked = sorted(others, key=lambda m: -m.val_qwk)
            n = len(ranked)
            rank_mass = [n - r for r in range(n)]  # R, R-1, ..., 1
            total = sum(rank_mass)
            for m, mass in zip(ranked, rank_mass):
                weights[m.key] = residual * mass / total
        else:
            scale = sum(fixed.values())
            weights = {k: v / scale for k, v in fixed.items()}
        self.members_ = [m for m in self.members_ if m.key in weights]
        self.weights_ = np.asarray([weights[m.key] for m in self.members_])

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        blend = self._matrix(essay_ids) @ self.weights_
        audit = self._audit()
        audit["elite_threshold"] = self.elite_threshold
        return _output(essay_ids, blend, audit)


class WeightedMedianEnsemble(_MemberEnsemble):
    """Per-essay weighted median under the exponential QWK weights.

    Medians stay on member values, so a single badly calibrated member
    cannot drag the blend the way a weighted mean can.
    """

    def _fit_weights(self) -> None:
        self.weights_ = member_weights_qwk(self.members_)

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        matrix = self._matrix(essay_ids)
        blend = np.asarray(
            [weighted_median(row, self.weights_) for row in matrix]
        )
        return _output(essay_ids, blend, self._audit())


class ConfidenceWeightedEnsemble(_MemberEnsemble):
    """Per-essay blend weighted by squared closeness to an integer score.

    confidence = 1 - |prediction - rounded prediction|. Members above the
    threshold contribute weight confidence^2; if none pass for an essay,
    every member contributes so each essay still gets a score.
    """

    def __init__(self, confidence_threshold: float = 0.6):
        self.confidence_threshold = confidence_threshold

    def _fit_weights(self) -> None:
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise EnsembleError("confidence_threshold must be in [0, 1]")
        self.weights_ = np.full(len(self.members_), 1.0 / len(self.members_))

    @staticmethod
    def confidence(pred: np.ndarray) -> np.ndarray:
        rounded = np.floor(np.clip(pred, SCORE_MIN, SCORE_MAX) + 0.5)
        return 1.0 - np.abs(pred - rounded)

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        matrix = self._matrix(essay_ids)
        conf = self.confidence(matrix)
        passing = conf > self.confidence_threshold
        sq = conf**2
        blend = np.empty(matrix.shape[0])
        for i in range(matrix.shape[0]):
            mask = passing[i] if passing[i].any() else np.ones_like(passing[i])
            w = sq[i] * mask
            blend[i] = (w @ matrix[i]) / w.sum()
        audit = self._audit()
        audit["confidence_threshold"] = self.confidence_threshold
        return _output(essay_ids, blend, audit)


class TieredEnsemble(BaseEstimator):
    """Elite blend with small outward pushes at the score extremes.

    Blends below `tier_low` move down by `tier_delta`, blends above
    `tier_high` move up by `tier_delta`; the interior is untouched.
    """

    def __init__(self, elite_threshold: float = 0.8, tier_low: float = 1.0,
                 tier_high: float = 3.0, tier_delta: float = 0.1):
        self.elite_threshold = elite_threshold
        self.tier_low = tier_low
        self.tier_high = tier_high
        self.tier_delta = tier_delta

    def fit(self, members: Sequence[PredictionSet], y=None, essay_ids=None):
        if self.tier_delta < 0:
            raise EnsembleError("tier_delta must be >= 0")
        for name in ("tier_low", "tier_high"):
            v = getattr(self, name)
            if not SCORE_MIN <= v <= SCORE_MAX:
                raise EnsembleError(f"{name}={v} outside [0, 4]")
        self.base_ = EliteEnsemble(elite_threshold=self.elite_threshold).fit(members)
        return self

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        base = self.base_.predict(essay_ids)
        blend = np.asarray([base.blend[e] for e in essay_ids])
        adjusted = blend.copy()
        adjusted[blend < self.tier_low] -= self.tier_delta
        adjusted[blend > self.tier_high] += self.tier_delta
        adjusted = np.clip(adjusted, SCORE_MIN, SCORE_MAX)
        audit = dict(base.audit)
        audit.update(
            strategy=type(self).__name__,
            tier_low=self.tier_low,
            tier_high=self.tier_high,
            tier_delta=self.tier_delta,
        )
        return _output(essay_ids, adjusted, audit)


class StackingEnsemble(BaseEstimator):
    """Ridge meta-learner over member predictions.

    fit() needs the validation essay ids and their true scores: the
    design matrix is the member predictions on those essays (canonical
    member order), alpha comes from k-fold cross-validation, and the
    final ridge is refit on the whole validation split.
    """

    def __init__(self, alpha_grid=DEFAULT_ALPHA_GRID, k_folds: int = DEFAULT_CV_FOLDS,
                 seed: int = 0):
        self.alpha_grid = alpha_grid
        self.k_folds = k_folds
        self.seed = seed

    def fit(self, members: Sequence[PredictionSet], y, essay_ids: Sequence[int]):
        self.members_ = ordered_members(members)
        y = np.asarray(y, dtype=float)
        X = np.column_stack([m.vector(essay_ids) for m in self.members_])
        self.alpha_, self.cv_errors_ = cv_select_alpha(
            X, y, grid=self.alpha_grid, k=self.k_folds, seed=self.seed
        )
        self.model_ = ClosedFormRidge(alpha=self.alpha_).fit(X, y)
        return self

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        X = np.column_stack([m.vector(essay_ids) for m in self.members_])
        blend = np.clip(self.model_.predict(X), SCORE_MIN, SCORE_MAX)
        audit = {
            "strategy": type(self).__name__,
            "member_order": [list(m.key) for m in self.members_],
            "weights": [float(w) for w in self.model_.coef_],
            "intercept": float(self.model_.intercept_),
            "alpha": self.alpha_,
            "cv_errors": {str(a): e for a, e in sorted(self.cv_errors_.items())},
        }
        return _output(essay_ids, blend, audit)


def stacking_predict(model: StackingEnsemble, members: Sequence[PredictionSet],
                     essay_ids: Sequence[int]) -> EnsembleOutput:
    """Apply a fitted stacking model to a member set, checking order."""
    given = [m.key for m in ordered_members(members)]
    fitted = [m.key for m in model.members_]
    if given != fitted:
        raise EnsembleError(
            f"member order mismatch: fitted on {fitted}, given {given}"
        )
    return model.predict(essay_ids)


class CorrelationOptimizedEnsemble(_MemberEnsemble):
    """Weighted average mixing validation QWK and rank correlation.

    raw_i = qwk_i^3 * (1 + spearman_i); a member with correlation -1 is
    silenced, and negative raw weights (possible only with negative QWK)
    are clamped to zero to keep the blend inside the member hull.
    """

    def _fit_weights(self) -> None:
        qwks = _require_stat(self.members_, "val_qwk")
        corrs = _require_stat(self.members_, "val_spearman")
        raw = np.maximum(qwks**3 * (1.0 + corrs), 0.0)
        total = raw.sum()
        if total <= 0:
            raise EnsembleError("correlation-optimized weights sum to zero")
        self.weights_ = raw / total

    def predict(self, essay_ids: Sequence[int]) -> EnsembleOutput:
        blend = self._matrix(essay_ids) @ self.weights_
        return _output(essay_ids, blend, self._audit())


STRATEGIES = {
    "qwk_optimized": QwkOptimizedEnsemble,
    "elite": EliteEnsemble,
    "weighted_median": WeightedMedianEnsemble,
    "confidence_weighted": ConfidenceWeightedEnsemble,
    "tiered": TieredEnsemble,
    "stacking": StackingEnsemble,
    "correlation_optimized": CorrelationOptimizedEnsemble,
}

STRATEGY_LABELS = {
    "qwk_optimized": "QWK Optimized Ensemble",
    "elite": "Elite Ensemble",
    "weighted_median": "Weighted Median",
    "confidence_weighted": "Confidence Weighted",
    "tiered": "Tiered Ensemble",
    "stacking": "Stacking Ensemble",
    "correlation_optimized": "Correlation Optimized",
}


@dataclass(frozen=True)
class EnsembleSpec:
    """Strategy identifier plus every tunable strategy parameter."""

    strategy: str
    source_tags: tuple[str, ...] = SOURCE_TAGS
    elite_threshold: float = 0.8
    confidence_threshold: float = 0.6
    tier_low: float = 1.0
    tier_high: float = 3.0
    tier_delta: float = 0.1
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    k_folds: int = DEFAULT_CV_FOLDS
    seed: int = 0

    def build(self) -> BaseEstimator:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        cls = STRATEGIES[self.strategy]
        kwargs = {
            "elite": {"elite_threshold": self.elite_threshold},
            "confidence_weighted": {"confidence_threshold": self.confidence_threshold},
            "tiered": {
                "elite_threshold": self.elite_threshold,
                "tier_low": self.tier_low,
                "tier_high": self.tier_high,
                "tier_delta": self.tier_delta,
            },
            "stacking": {
                "alpha_grid": tuple(self.alpha_grid),
                "k_folds": self.k_folds,
                "seed": self.seed,
            },
        }.get(self.strategy, {})
        return cls(**kwargs)
