import math
from dataclasses import asdict, replace

import numpy as np
import pytest

from activecloak.experiments import (
    Setup,
    SweepSpec,
    lemma_check,
    monotone_threshold,
    operator_spectrum,
    pk_scan,
    proposition_rhs,
    run_sweep,
    solve_setup,
    stability_check,
    svd_study,
)
from activecloak.geometry import GeometryError


def test_with_axis():
    s = Setup()
    assert s.with_axis("k", 3).k == 3.0
    assert s.with_axis("d", 0.005).geometry.distance == pytest.approx(0.005)
    assert s.with_axis("epsilon", 0.01).epsilon == 0.01
    assert s.with_axis("R", 5).geometry.R == 5.0
    with pytest.raises(ValueError):
        s.with_axis("mu", 1.0)
    with pytest.raises(GeometryError):
        s.with_axis("d", 1e-4)


def test_baseline_solve():
    res = solve_setup(Setup())
    assert 0.018 <= res.clean.near_rel <= 0.022
    assert 0.018 <= res.noisy.near_rel <= 0.022
    assert 0.02 <= res.rel_sensitivity <= 0.10
    assert res.stability_ratio == pytest.approx(res.abs_sensitivity / res.noisy.phi_norm)


def test_zero_noise_solution_is_clean():
    res = solve_setup(replace(Setup(), epsilon=0.0))
    assert res.noisy is res.clean
    assert res.abs_sensitivity == 0


def test_sweep_schedule_independent():
    spec = SweepSpec(Setup(), "k", (1.0, 20.0), "epsilon", (0.001, 0.01))
    serial = run_sweep(spec, threads=1)
    parallel = run_sweep(spec, threads=4)
    assert [asdict(c) for c in serial] == [asdict(c) for c in parallel]
    assert all(c.status == "ok" for c in serial)
    assert [(c.i, c.j) for c in serial] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_sweep_failures_are_recorded():
    base = replace(Setup(), window=(0.5, 1.0))
    cells = run_sweep(SweepSpec(base, "k", (5.0,), "d", (0.001, 0.002)))
    assert all(c.status == "failed" and "sign change" in c.message for c in cells)
    assert all(math.isnan(c.alpha) for c in cells)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(Setup(), "k", (1.0,), "k", (2.0,))
    with pytest.raises(ValueError):
        SweepSpec(Setup(), "k", (1.0,), "d", (1e-4,))
    with pytest.raises(ValueError):
        SweepSpec(Setup(), "k", (), "d", (0.002,))


def test_monotone_threshold():
    a = np.logspace(-3, 0, 4)
    assert monotone_threshold(a, np.array([3.0, 1.0, 2.0, 4.0])) == (a[1], False)
    assert monotone_threshold(a, np.array([1.0, 2.0, 3.0, 4.0])) == (a[0], True)
    assert monotone_threshold(a, np.array([1.0, 2.0, 2.0, 4.0])) == (a[2], False)


def test_pk_scan_rows():
    rows = pk_scan(Setup(), [1.0, 11.0], per_decade=50)
    assert [r.k for r in rows] == [1.0, 11.0]
    for r in rows:
        assert r.status == "ok"
        # the Morozov root sits inside the window where E increases
        assert r.morozov_alpha > 10.0**r.neg_pk
        assert -7 < r.neg_pk < -3


def test_stability_check_small():
    rep = stability_check(Setup(), [0.001, 0.01], [0, 1])
    assert len(rep.records) == 4
    assert rep.sqrt_bound_holds
    assert rep.slope > 0.5
    assert all(r.status == "ok" for r in rep.records)


def test_proposition_rhs_limits():
    assert proposition_rhs(1.0, 1.0, 0.0, 0.02, 5.0) == 0
    assert proposition_rhs(1.0, 2.0, 0.0, 0.02, 5.0) == pytest.approx(1.0)
    # with b = 0 the bound is sqrt(q) with q = 16 ||K||^2 eps (2 delta + delta eps + eps) / alpha0
    q = 16 * 4.0 * 0.01 * (0.04 + 0.0002 + 0.01)
    assert proposition_rhs(1.0, 1.0, 0.01, 0.02, 2.0) == pytest.approx(math.sqrt(q))


def test_spectrum_trend():
    s_close = operator_spectrum(Setup().with_axis("d", 1e-3), 50)
    s_far = operator_spectrum(Setup().with_axis("d", 1e-2), 50)
    assert np.all(np.diff(s_close) <= 0)
    assert s_close[-1] / s_close[0] > s_far[-1] / s_far[0]


def test_svd_study_shape():
    st = svd_study(Setup(), [0.001, 0.004], [1.0, 10.0], count=8, threads=2)
    assert sorted(st.spectra) == [0.001, 0.004]
    assert len(st.surface) == 4
    for d, k, s1, gap in st.surface:
        assert s1 > 0 and 0 <= gap <= 1


def test_lemma_check_baseline():
    lb = lemma_check(Setup())
    assert lb.f1_bound_holds and lb.alpha_bound_holds
