import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igmn.errors import SingularUpdate
from igmn.numerics import (
    P_MAX,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    det_rank_one,
    gammainc_lower,
    gammainc_upper,
    log_sum_exp,
    quadratic_form,
    sm_rank_one,
)

from oracles import chi2_cdf_quad, chi2_quantile_bisect, random_spd

GRID_P = (0.5, 0.9, 0.95, 0.99, 0.999)
GRID_DOF = (1, 2, 4, 10, 34, 100)


# frozen from chi2_quantile_bisect (quadrature + bisection)
FROZEN_QUANTILES = [
    (1, 0.5, 0.4549364231195734),
    (2, 0.95, 5.991464547107983),
    (4, 0.999, 18.46682695290317),
    (34, 0.999, 65.24721746094241),
    (100, 0.99, 135.80672317102665),
]


@pytest.mark.parametrize("dof,p,expected", FROZEN_QUANTILES)
def test_chi2_quantile_frozen(dof, p, expected):
    assert chi2_quantile(dof, p) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("dof", GRID_DOF)
@pytest.mark.parametrize("p", GRID_P)
def test_chi2_quantile_matches_bisection_oracle(dof, p):
    ref = chi2_quantile_bisect(dof, p)
    assert abs(chi2_quantile(dof, p) - ref) <= 1e-6 * ref


def test_chi2_two_dof_closed_form():
    # with two degrees of freedom the quantile is -2 log(1 - p)
    for p in (1e-6, 0.3, 0.99, 1 - 1e-9):
        assert chi2_quantile(2, p) == pytest.approx(-2.0 * math.log1p(-p), rel=1e-12)


def test_chi2_quantile_clamps_near_one():
    assert chi2_quantile(3, 1.0 - 1e-14) == chi2_quantile(3, P_MAX)
    assert math.isfinite(chi2_quantile(3, 1.0 - 1e-16))


def test_chi2_quantile_rejects_bad_input():
    with pytest.raises(ValueError):
        chi2_quantile(0, 0.5)
    with pytest.raises(ValueError):
        chi2_quantile(2.5, 0.5)
    with pytest.raises(ValueError):
        chi2_quantile(2, 1.0)
    with pytest.raises(ValueError):
        chi2_quantile(2, -0.1)
    assert chi2_quantile(5, 0.0) == 0.0


@pytest.mark.parametrize("dof", [1, 3, 10, 57])
def test_chi2_cdf_against_quadrature(dof):
    for q in (0.01, 0.5 * dof, dof, 2.0 * dof + 5):
        assert chi2_cdf(q, dof) == pytest.approx(chi2_cdf_quad(q, dof), rel=1e-10, abs=1e-15)
        assert chi2_cdf(q, dof) + chi2_sf(q, dof) == pytest.approx(1.0, abs=1e-14)


@given(st.floats(0.5, 60.0), st.floats(1e-3, 200.0))
@settings(max_examples=60, deadline=None)
def test_incomplete_gamma_halves_sum_to_one(a, x):
    assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(1, 120), st.floats(1e-4, 1 - 1e-6))
@settings(max_examples=80, deadline=None)
def test_chi2_quantile_inverts_cdf(dof, p):
    q = chi2_quantile(dof, p)
    if p > 0.5:
        assert chi2_sf(q, dof) == pytest.approx(1 - p, rel=1e-8)
    else:
        assert chi2_cdf(q, dof) == pytest.approx(p, rel=1e-8)


def test_quantile_monotone_in_p():
    ps = np.linspace(0.01, 0.999, 40)
    qs = [chi2_quantile(7, p) for p in ps]
    assert np.all(np.diff(qs) > 0)


# -- rank-one updates ---------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_sherman_morrison_against_dense_inverse(seed):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(1, 9))
    A = random_spd(rng, D)
    u = rng.standard_normal(D)
    c = float(rng.uniform(-0.3, 2.0)) / max(1.0, u @ np.linalg.solve(A, u))
    got = sm_rank_one(np.linalg.inv(A), u, c)
    np.testing.assert_allclose(got, np.linalg.inv(A + c * np.outer(u, u)), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_determinant_lemma_against_dense(seed):
    rng = np.random.default_rng(100 + seed)
    D = int(rng.integers(1, 9))
    A = random_spd(rng, D)
    u = rng.standard_normal(D)
    c = 0.7
    got = det_rank_one(np.linalg.det(A), np.linalg.inv(A), u, c)
    assert got == pytest.approx(np.linalg.det(A + c * np.outer(u, u)), rel=1e-10)


def test_sherman_morrison_singular():
    A = np.eye(2)
    u = np.array([1.0, 0.0])
    with pytest.raises(SingularUpdate):
        sm_rank_one(A, u, -1.0)


def test_shape_checks():
    with pytest.raises(ValueError):
        quadratic_form(np.eye(2), np.ones(3))
    with pytest.raises(ValueError):
        sm_rank_one(np.ones((2, 3)), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        det_rank_one(0.0, np.eye(2), np.ones(2), 1.0)


def test_quadratic_form():
    M = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert quadratic_form(M, [1.0, -1.0]) == 3.0


# -- log-sum-exp --------------------------------------------------------------


def test_log_sum_exp_basic():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2))
    assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000 + math.log(2))
    assert log_sum_exp([1000.0, 0.0]) == pytest.approx(1000.0)
    assert log_sum_exp([-math.inf, -math.inf]) == -math.inf
    assert log_sum_exp([-math.inf, 0.0]) == 0.0
    with pytest.raises(ValueError):
        log_sum_exp([])


@given(
    st.lists(st.floats(-500, 500), min_size=1, max_size=20),
    st.floats(-1e4, 1e4),
)
@settings(max_examples=100, deadline=None)
def test_log_sum_exp_shift_invariance(values, shift):
    v = np.array(values)
    assert log_sum_exp(v + shift) == pytest.approx(log_sum_exp(v) + shift, rel=1e-12, abs=1e-9)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
@settings(max_examples=50, deadline=None)
def test_log_sum_exp_bounds(values):
    v = np.array(values)
    out = log_sum_exp(v)
    assert v.max() - 1e-12 <= out <= v.max() + math.log(v.size) + 1e-12
