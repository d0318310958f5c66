"""Numerical kernels for the ensemble layer.

Closed-form ridge regression with an unpenalized intercept, k-fold
cross-validation over a regularization grid, and the lower weighted
median.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array

__all__ = [
    "ClosedFormRidge",
    "ridge_fit",
    "cv_select_alpha",
    "weighted_median",
    "DEFAULT_ALPHA_GRID",
    "DEFAULT_CV_FOLDS",
]

DEFAULT_ALPHA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_CV_FOLDS = 5

# Singularity guard for the unregularized normal equations.
_COND_LIMIT = 1e12


class ClosedFormRidge(BaseEstimator, RegressorMixin):
    """Ridge regression solved in closed form on centered data.

    Columns and targets are mean-centered so the intercept is never
    penalized; weights solve (X'X + alpha*I) w = X'y via a Cholesky
    factorization of the symmetric positive-definite system.
    """

    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha

    def fit(self, X, y) -> "ClosedFormRidge":
        X = check_array(X, ensure_min_samples=2)
        y = np.asarray(y, dtype=float).ravel()
        if y.size != X.shape[0]:
            raise ValueError("ridge: X and y row counts differ")
        if not np.all(np.isfinite(y)):
            raise ValueError("ridge: non-finite target values")
        if self.alpha < 0:
            raise ValueError("ridge: alpha must be >= 0")

        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        yc = y - y_mean
        gram = Xc.T @ Xc
        if self.alpha == 0.0 and np.linalg.cond(gram) > _COND_LIMIT:
            raise np.linalg.LinAlgError(
                "ridge: singular system at alpha=0; use a positive alpha"
            )
        system = gram + self.alpha * np.eye(X.shape[1])
        try:
            self.coef_ = cho_solve(cho_factor(system), Xc.T @ yc)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
            raise np.linalg.LinAlgError(
                "ridge: factorization failed; use a positive alpha"
            ) from exc
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("ridge: feature count differs from fit")
        return self.intercept_ + X @ self.coef_


def ridge_fit(X, y, alpha: float) -> ClosedFormRidge:
    """Fit a ClosedFormRidge; convenience wrapper around the estimator."""
    return ClosedFormRidge(alpha=alpha).fit(X, y)


def cv_select_alpha(
    X,
    y,
    grid=DEFAULT_ALPHA_GRID,
    k: int = DEFAULT_CV_FOLDS,
    seed: int = 0,
) -> tuple[float, dict[float, float]]:
    """Pick the ridge alpha minimizing mean k-fold held-out squared error.

    Folds are contiguous slices of a seeded shuffle, so the assignment is
    reproducible from `seed` alone. Ties in mean error break toward the
    larger alpha.
    """
    X = check_array(X)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if k < 2:
        raise ValueError("cv_select_alpha: k must be >= 2")
    if n < k:
        raise ValueError(f"cv_select_alpha: {n} rows cannot fill {k} folds")
    grid = [float(a) for a in grid]
    if not grid or any(a < 0 for a in grid):
        raise ValueError("cv_select_alpha: grid must be non-empty and nonnegative")

    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    errors: dict[float, float] = {}
    for alpha in grid:
        fold_mse = []
        for held_out in folds:
            train = np.setdiff1d(perm, held_out, assume_unique=True)
            model = ClosedFormRidge(alpha=alpha).fit(X[train], y[train])
            resid = model.predict(X[held_out]) - y[held_out]
            fold_mse.append(float(np.mean(resid**2)))
        errors[alpha] = float(np.mean(fold_mse))
    best_error = min(errors.values())
    best_alpha = max(a for a in grid if errors[a] == best_error)
    return best_alpha, errors


def weighted_median(values, weights) -> float:
    """Lower weighted median: the smallest value whose cumulative weight
    reaches half the total. Always one of the input values."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.size == 0 or v.shape != w.shape:
        raise ValueError("weighted_median: need equal-length non-empty inputs")
    if np.any(w < 0):
        raise ValueError("weighted_median: negative weight")
    total = w.sum()
    if total <= 0:
        raise ValueError("weighted_median: total weight must be positive")
    order = np.argsort(v, kind="stable")
    cumulative = np.cumsum(w[order])
    idx = int(np.searchsorted(cumulative, total / 2.0))
    return float(v[order][idx])
