from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rationale_aes.numerics import (
    ClosedFormRidge,
    cv_select_alpha,
    ridge_fit,
    weighted_median,
)


def normal_equations_lstsq(X, y):
    """Independent least-squares oracle with explicit intercept column."""
    X1 = np.c_[np.ones(len(X)), X]
    beta, *_ = np.linalg.lstsq(X1, y, rcond=None)
    return beta[0], beta[1:]


def random_instance(rng, n=None, m=None):
    n = n or int(rng.integers(5, 100))
    m = m or int(rng.integers(1, min(10, n - 1) + 1))
    X = rng.normal(size=(n, m))
    y = X @ rng.normal(size=m) + rng.normal(scale=0.1, size=n)
    return X, y


class TestRidge:
    def test_exact_line(self):
        model = ridge_fit([[1.0], [2.0]], [1.0, 2.0], alpha=0.0)
        assert model.coef_[0] == pytest.approx(1.0, abs=1e-12)
        assert model.intercept_ == pytest.approx(0.0, abs=1e-12)

    def test_shrunk_scalar(self):
        model = ridge_fit([[1.0], [-1.0]], [1.0, -1.0], alpha=1.0)
        assert model.coef_[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert model.intercept_ == pytest.approx(0.0, abs=1e-12)

    def test_infinite_alpha_limit(self):
        rng = np.random.default_rng(0)
        X, y = random_instance(rng, n=30, m=3)
        model = ridge_fit(X, y, alpha=1e12)
        assert np.allclose(model.coef_, 0.0, atol=1e-9)
        assert model.intercept_ == pytest.approx(np.mean(y), abs=1e-6)

    def test_gradient_residual(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            X, y = random_instance(rng)
            alpha = float(rng.uniform(0.01, 10.0))
            model = ridge_fit(X, y, alpha)
            Xc = X - X.mean(axis=0)
            yc = y - y.mean()
            grad = 2 * Xc.T @ (Xc @ model.coef_ - yc) + 2 * alpha * model.coef_
            assert np.max(np.abs(grad)) < 1e-9 * max(1.0, np.abs(yc).max())

    def test_alpha_zero_matches_lstsq(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            X, y = random_instance(rng)
            model = ridge_fit(X, y, alpha=0.0)
            intercept, coef = normal_equations_lstsq(X, y)
            assert np.allclose(model.coef_, coef, atol=1e-9)
            assert model.intercept_ == pytest.approx(intercept, abs=1e-9)

    def test_singular_at_alpha_zero(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(np.linalg.LinAlgError, match="positive alpha"):
            ridge_fit(X, [1.0, 2.0, 3.0], alpha=0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ridge_fit([[1.0], [2.0]], [1.0, np.nan], alpha=1.0)

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            ridge_fit([[1.0], [2.0]], [1.0, 2.0], alpha=-1.0)

    def test_predict_shape_check(self):
        model = ridge_fit([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [1.0, 2.0, 3.0], 0.1)
        with pytest.raises(ValueError):
            model.predict([[1.0]])

    def test_get_params_round_trip(self):
        model = ClosedFormRidge(alpha=2.5)
        assert model.get_params() == {"alpha": 2.5}
        model.set_params(alpha=0.5)
        assert model.alpha == 0.5


class TestCvSelectAlpha:
    def test_single_element_grid(self):
        rng = np.random.default_rng(3)
        X, y = random_instance(rng, n=20, m=2)
        best, errors = cv_select_alpha(X, y, grid=[0.7], k=4)
        assert best == 0.7
        assert set(errors) == {0.7}

    def test_noiseless_linear_prefers_light_shrinkage(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + 3.0
        best, errors = cv_select_alpha(X, y, grid=[0.01, 100.0], k=5)
        assert best == 0.01
        assert errors[0.01] < errors[100.0]

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X, y = random_instance(rng, n=25, m=3)
        first = cv_select_alpha(X, y, grid=[0.1, 1.0, 10.0], k=5, seed=11)
        second = cv_select_alpha(X, y, grid=[0.1, 1.0, 10.0], k=5, seed=11)
        assert first == second

    def test_grid_order_invariant(self):
        rng = np.random.default_rng(6)
        X, y = random_instance(rng, n=25, m=3)
        a = cv_select_alpha(X, y, grid=[0.1, 1.0, 10.0], k=5)
        b = cv_select_alpha(X, y, grid=[10.0, 0.1, 1.0], k=5)
        assert a[0] == b[0]
        assert a[1] == b[1]

    def test_errors_nonnegative(self):
        rng = np.random.default_rng(7)
        X, y = random_instance(rng, n=30, m=4)
        _, errors = cv_select_alpha(X, y, k=5)
        assert all(e >= 0 for e in errors.values())

    def test_tie_breaks_to_larger_alpha(self):
        # Duplicate alphas yield identical errors; larger must win.
        rng = np.random.default_rng(8)
        X, y = random_instance(rng, n=20, m=2)
        _, errors = cv_select_alpha(X, y, grid=[1.0, 1.0], k=4)
        best, _ = cv_select_alpha(X, y, grid=[1.0], k=4)
        assert best == 1.0

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            cv_select_alpha([[1.0], [2.0]], [1.0, 2.0], grid=[1.0], k=5)


class TestWeightedMedian:
    def test_plain_median(self):
        assert weighted_median([1, 2, 3], [1, 1, 1]) == 2

    def test_dominant_tail_weight(self):
        assert weighted_median([1, 2, 3], [0.2, 0.2, 0.6]) == 3

    def test_single_value(self):
        assert weighted_median([4.2], [0.3]) == 4.2

    def test_all_zero_weights(self):
        with pytest.raises(ValueError):
            weighted_median([1, 2], [0, 0])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            weighted_median([1, 2], [1, -1])

    def test_scale_invariance(self):
        values = [0.3, 1.7, 2.2, 3.9]
        weights = [0.1, 0.4, 0.3, 0.2]
        base = weighted_median(values, weights)
        assert weighted_median(values, [7.5 * w for w in weights]) == base

    def test_exhaustive_against_expansion(self):
        # All integer-weight instances with total weight <= 12.
        for size in range(1, 5):
            values = [0.5, 1.5, 2.5, 3.5][:size]
            for weights in itertools.product(range(13), repeat=size):
                total = sum(weights)
                if total == 0 or total > 12:
                    continue
                expanded = sorted(
                    v for v, w in zip(values, weights) for _ in range(w)
                )
                lower_median = expanded[(len(expanded) - 1) // 2]
                assert weighted_median(values, weights) == lower_median

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=8),
           st.integers(0, 7), st.floats(0.01, 10))
    def test_monotone_in_values(self, values, index, bump):
        weights = [1.0] * len(values)
        index %= len(values)
        base = weighted_median(values, weights)
        values[index] += bump
        assert weighted_median(values, weights) >= base
