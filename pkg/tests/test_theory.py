import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from anonsearch.theory import (
    FitError,
    coefficient_of_variation,
    fit_relationship,
    predicted_log_rho,
    predicted_slope,
)


def test_predicted_log_rho_hand_values():
    # c=2, |v(A)|=3, d=4, l=1: (2/8) * (2 + 2*(1-0.5)*3) = 0.25 * 5
    assert predicted_log_rho(0.5, 2.0, 3.0, 4) == pytest.approx(1.25)
    assert predicted_log_rho(0.5, 2.0, 3.0, 4, l=2, log_Z=1.0) == pytest.approx(1.5)
    assert predicted_log_rho(1.0, 2.0, 3.0, 4) == pytest.approx(0.5)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.integers(1, 500), st.integers(1, 10), st.floats(0, 2))
def test_slope_is_derivative(c, norm_a, d, l, alpha):
    h = 1e-3
    numeric = (predicted_log_rho(alpha + h, c, norm_a, d, l) - predicted_log_rho(alpha - h, c, norm_a, d, l)) / (2 * h)
    assert numeric == pytest.approx(predicted_slope(c, norm_a, d, l), rel=1e-6, abs=1e-9)


def test_fit_matches_scipy_linregress():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 2, 80)
    y = -0.7 * x + 0.3 + rng.normal(0, 0.2, 80)
    fit = fit_relationship(zip(x, y))
    ref = stats.linregress(x, y)
    assert fit.slope == pytest.approx(ref.slope, rel=1e-10)
    assert fit.intercept == pytest.approx(ref.intercept, rel=1e-10)
    assert fit.pearson_r == pytest.approx(ref.rvalue, rel=1e-10)
    assert fit.r_squared == pytest.approx(ref.rvalue ** 2, rel=1e-10)
    assert fit.sample_count == 80


def test_fit_is_order_invariant_bitwise():
    rng = np.random.default_rng(1)
    pts = list(zip(rng.uniform(0, 2, 50), rng.normal(size=50)))
    a = fit_relationship(pts)
    b = fit_relationship(list(reversed(pts)))
    assert a == b


def test_fit_drops_non_finite_and_errors():
    assert fit_relationship([(0, 0), (1, 1), (2, 2), (3, math.nan), (math.inf, 1)]).sample_count == 3
    with pytest.raises(FitError):
        fit_relationship([(0, 0), (1, 1)])
    with pytest.raises(FitError):
        fit_relationship([(1, 0), (1, 1), (1, 2)])
    assert fit_relationship([(0, 1), (1, 1), (2, 1)]).pearson_r == 0.0


def test_coefficient_of_variation():
    assert coefficient_of_variation([2, 2, 2]) == 0.0
    assert coefficient_of_variation([1, 3]) == pytest.approx(0.5)
    assert math.isnan(coefficient_of_variation([]))


@settings(max_examples=40, deadline=None)
@given(st.floats(1, 8), st.floats(1, 8), st.sampled_from([50, 100, 300]), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_noiseless_generated_data_recovers_exact_line(c, norm_a, d, l, seed):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0, 2, 30)
    y = [predicted_log_rho(a, c, norm_a, d, l, log_Z=2.0) for a in alpha]
    fit = fit_relationship(zip(alpha, y))
    assert fit.slope == pytest.approx(predicted_slope(c, norm_a, d, l), rel=1e-9, abs=1e-12)
