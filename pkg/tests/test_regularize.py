import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activecloak.experiments import Setup, incident_trace, operator_for
from activecloak.operator import OperatorMatrix
from activecloak.regularize import (
    DiscrepancyFunction,
    MorozovError,
    MorozovSolution,
    SvdFactors,
    consistency_warning,
    discrepancy,
    discrepancy_derivative,
    lemma_bounds_check,
    morozov_find,
    singular_spectrum,
    tikhonov_solve,
)


def toy_operator(entries, rows_near, near_w=None, far_w=None, far_radius=1.0):
    entries = np.asarray(entries, dtype=complex)
    m, n = entries.shape
    near_w = np.ones(rows_near) if near_w is None else np.asarray(near_w, dtype=float)
    far_w = np.ones(m - rows_near) if far_w is None else np.asarray(far_w, dtype=float)
    return OperatorMatrix(entries, rows_near, m - rows_near, near_w, far_w,
                          np.full(n, 2 * np.pi / n), 2 * np.pi * np.arange(n) / n, 1.0, far_radius)


def random_operator(rng, m_near=7, m_far=5, n=4, weighted=True):
    a = rng.normal(size=(m_near + m_far, n)) + 1j * rng.normal(size=(m_near + m_far, n))
    w = rng.uniform(0.5, 2.0, m_near + m_far) if weighted else np.ones(m_near + m_far)
    return toy_operator(a, m_near, w[:m_near], w[m_near:], far_radius=0.3)


@pytest.fixture(scope="module")
def baseline():
    setup = Setup()
    A, fac = operator_for(setup)
    return setup, A, fac, incident_trace(setup)


def test_rank_one_closed_form():
    u = np.array([1.0, 2.0, 2.0]) / 3
    v = np.array([1.0, 1j]) / math.sqrt(2)
    s = 2.5
    A = toy_operator(s * np.outer(u, v.conj()), 2)
    f1, f2 = np.array([1.0, -0.5]), np.array([0.25])
    alpha = 0.3
    f = np.concatenate([f1, f2])
    want = s / (s * s + alpha) * np.vdot(u, f) * v
    np.testing.assert_allclose(tikhonov_solve(A, f1, alpha, f2), want, atol=1e-15)


@pytest.mark.parametrize("weighting", ["euclidean", "quadrature"])
def test_normal_equations(rng, weighting):
    A = random_operator(rng)
    fac = SvdFactors.from_operator(A, weighting)
    f1 = rng.normal(size=7) + 1j * rng.normal(size=7)
    alpha = 0.07
    h = tikhonov_solve(fac, f1, alpha)
    W = np.diag(fac.sqrt_w**2)
    f = np.concatenate([f1, np.zeros(5)])
    lhs = A.entries.conj().T @ W @ A.entries @ h + alpha * h
    np.testing.assert_allclose(lhs, A.entries.conj().T @ W @ f, atol=1e-12)


def test_alpha_must_be_positive(rng):
    A = random_operator(rng)
    with pytest.raises(ValueError):
        tikhonov_solve(A, np.ones(7), 0.0)


def test_discrepancy_function_matches_direct_formula(rng):
    A = random_operator(rng)
    f1 = rng.normal(size=7) + 1j * rng.normal(size=7)
    fun = DiscrepancyFunction(A, f1, 0.1)
    for alpha in (1e-3, 0.2, 5.0):
        h = tikhonov_solve(A, f1, alpha)
        assert fun(alpha) == pytest.approx(discrepancy(A, f1, None, h, 0.1), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), log_alpha=st.floats(-3, 1),
       weighting=st.sampled_from(["euclidean", "quadrature"]))
def test_derivative_finite_difference(seed, log_alpha, weighting):
    rng = np.random.default_rng(seed)
    A = random_operator(rng)
    fac = SvdFactors.from_operator(A, weighting)
    f1 = rng.normal(size=7) + 1j * rng.normal(size=7)
    fun = DiscrepancyFunction(fac, f1, 0.1)
    alpha = 10.0**log_alpha
    step = 1e-5 * alpha
    fd = (fun(alpha + step) - fun(alpha - step)) / (2 * step)
    assert fun.derivative(alpha) == pytest.approx(fd, rel=1e-5, abs=1e-12)


@pytest.mark.parametrize("weighting", ["euclidean", "quadrature"])
def test_closed_form_derivative_in_regularization_norm(rng, weighting):
    A = random_operator(rng)
    fac = SvdFactors.from_operator(A, weighting)
    f1 = rng.normal(size=7) + 1j * rng.normal(size=7)
    fun = DiscrepancyFunction(fac, f1, 0.1, norm="regularization")
    for alpha in (1e-3, 0.05, 2.0):
        assert fun.closed_form_derivative(alpha) == pytest.approx(fun.derivative(alpha), rel=1e-10)


def scalar_problem(s=1.7, w_near=0.3):
    """Near block ``[s]``, far block ``[0]``: ``E(alpha) = (alpha / (s^2 + alpha))^2``."""
    return toy_operator([[s], [0.0]], 1, near_w=[w_near], far_w=[2.0])


@pytest.mark.parametrize("delta", [0.02, 0.2, 0.6])
def test_morozov_closed_form_root(delta):
    s = 1.7
    A = scalar_problem(s)
    sol = morozov_find(A, np.array([1.0 + 0.5j]), delta, window=(1e-8, 10.0), tol=1e-14)
    want = delta * s * s / (1 - delta)
    assert sol.alpha == pytest.approx(want, rel=1e-10)
    assert sol.converged
    assert sol.near_rel == pytest.approx(delta, rel=1e-10)
    assert sol.far_avg == 0


def test_morozov_picks_largest_root():
    # E is increasing here, so the root found from the top is the only one
    A = scalar_problem()
    fun = DiscrepancyFunction(A, np.array([1.0]), 0.3)
    sol = morozov_find(A, np.array([1.0]), 0.3, window=(1e-8, 10.0))
    grid = np.logspace(math.log10(sol.alpha) + 1e-6, 1, 50)
    assert all(fun(a) > 0 for a in grid)


def test_morozov_no_root():
    A = scalar_problem()
    with pytest.raises(MorozovError) as info:
        morozov_find(A, np.array([1.0]), 0.02, window=(0.5, 1.0))
    assert info.value.f_lo > 0 and info.value.f_hi > 0


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1])
def test_morozov_delta_range(delta):
    with pytest.raises(ValueError):
        morozov_find(scalar_problem(), np.array([1.0]), delta)


def test_baseline_root(baseline):
    setup, A, fac, f1 = baseline
    sol = morozov_find(fac, f1, setup.delta)
    assert isinstance(sol, MorozovSolution)
    assert abs(sol.discrepancy - setup.delta**2) <= 1e-8
    assert 0.018 <= sol.near_rel <= 0.022
    assert sol.far_avg <= setup.delta
    assert sol.newton_iters <= 10


def test_baseline_energy_increasing(baseline):
    setup, A, fac, f1 = baseline
    fun = DiscrepancyFunction(fac, f1, setup.delta)
    alphas = np.logspace(-4, 0, 60)
    assert np.all(np.diff([fun.energy(a) for a in alphas]) > 0)
    assert all(fun.derivative(a) > 0 for a in alphas[::6])


def test_residual_falls_with_alpha(baseline):
    setup, A, fac, f1 = baseline
    fun = DiscrepancyFunction(fac, f1, setup.delta)
    # strictly monotone in the norm the Tikhonov functional uses
    tik = [np.linalg.norm(fac.sqrt_w * fun.residual(a)) for a in np.logspace(0, -8, 33)]
    assert np.all(np.diff(tik) < 0)
    near = [fun.residual_terms(a)[0] for a in np.logspace(0, -4, 17)]
    assert np.all(np.diff(near) < 0)


def test_discrepancy_derivative_baseline(baseline):
    setup, A, fac, f1 = baseline
    fun = DiscrepancyFunction(fac, f1, setup.delta)
    for alpha in np.logspace(-4, -1, 5):
        step = 1e-4 * alpha
        fd = (fun(alpha + step) - fun(alpha - step)) / (2 * step)
        assert discrepancy_derivative(fac, f1, alpha) == pytest.approx(fd, rel=1e-4)


def test_lemma_bounds_and_skip(baseline):
    setup, A, fac, f1 = baseline
    sol = morozov_find(fac, f1, setup.delta)
    f_norm = float(np.linalg.norm(f1))
    lb = lemma_bounds_check(sol, f_norm, setup.delta, fac.near_norm())
    assert not lb.skipped and lb.f1_bound_holds and lb.alpha_bound_holds
    # 0.7 is still inside the hypothesis delta < 1/sqrt(2) = 0.7071...
    inside = lemma_bounds_check(morozov_find(fac, f1, 0.7, window=(1e-8, 1e4)), f_norm, 0.7, fac.near_norm())
    assert not inside.skipped
    sol = morozov_find(fac, f1, 0.75, window=(1e-8, 1e4))
    skipped = lemma_bounds_check(sol, f_norm, 0.75, fac.near_norm())
    assert skipped.skipped and skipped.f1_bound_holds is None
    assert "1/sqrt(2)" in skipped.as_dict()["reason"]


def test_consistency_warning():
    assert consistency_warning(1.0, 10.0, 0.02) is None
    assert "exceeds" in consistency_warning(1.0, 10.0, 0.2)


def test_singular_spectrum(baseline):
    _, A, fac, _ = baseline
    s = singular_spectrum(fac, 20)
    assert len(s) == 20 and np.all(np.diff(s) <= 0)
    with pytest.raises(ValueError):
        singular_spectrum(fac, 10**6)
