"""Parameter studies: control statistics over two-parameter grids, the
monotonicity threshold scan, singular value studies and empirical checks of
the noise stability bounds.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import IncidentField, add_noise, trace_point_source
from .geometry import Geometry, MIN_DISTANCE, sample_antenna, sample_control, sample_far_circle
from .operator import OperatorMatrix, assemble_dft, weighted_norm
from .regularize import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DiscrepancyFunction,
    MorozovError,
    MorozovSolution,
    SvdFactors,
    lemma_bounds_check,
    morozov_find,
)

log = logging.getLogger(__name__)

AXES = ("k", "d", "epsilon", "R")


@dataclass(frozen=True)
class Setup:
    """One fully specified control problem; defaults reproduce the baseline runs."""

    geometry: Geometry = field(default_factory=Geometry)
    n_a: int = 256
    n_arc1: int = 256
    n_R: int = 256
    k: float = 10.0
    source: Tuple[float, float] = (10000.0, 0.0)
    delta: float = 0.02
    epsilon: float = 0.005
    seed: int = 0
    noise_model: str = "standard"
    window: Tuple[float, float] = (1e-8, 1.0)
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    weighting: str = "euclidean"

    def with_axis(self, name: str, value: float) -> "Setup":
        if name == "k":
            return replace(self, k=float(value))
        if name == "d":
            return replace(self, geometry=self.geometry.with_distance(float(value)))
        if name == "epsilon":
            return replace(self, epsilon=float(value))
        if name == "R":
            return replace(self, geometry=self.geometry.with_far_radius(float(value)))
        raise ValueError(f"unknown sweep axis {name!r}; choose from {AXES}")


@dataclass(frozen=True)
class Discretization:
    antenna: object
    near: object
    far: object


@lru_cache(maxsize=16)
def discretize(geometry: Geometry, n_a: int, n_arc1: int, n_R: int) -> Discretization:
    return Discretization(
        sample_antenna(geometry, n_a),
        sample_control(geometry, n_arc1),
        sample_far_circle(geometry, n_R),
    )


@lru_cache(maxsize=16)
def _operator(geometry, n_a, n_arc1, n_R, k, weighting):
    disc = discretize(geometry, n_a, n_arc1, n_R)
    A = assemble_dft(disc.antenna, disc.near, disc.far, k)
    return A, SvdFactors.from_operator(A, weighting)


def operator_for(setup: Setup) -> Tuple[OperatorMatrix, SvdFactors]:
    """Assembled operator and its SVD, cached per geometry, counts and wavenumber."""
    return _operator(setup.geometry, setup.n_a, setup.n_arc1, setup.n_R, float(setup.k), setup.weighting)


def incident_trace(setup: Setup) -> np.ndarray:
    disc = discretize(setup.geometry, setup.n_a, setup.n_arc1, setup.n_R)
    return trace_point_source(IncidentField(tuple(setup.source), setup.k), disc.near)


def noisy_trace(setup: Setup, epsilon: Optional[float] = None, seed: Optional[int] = None) -> np.ndarray:
    disc = discretize(setup.geometry, setup.n_a, setup.n_arc1, setup.n_R)
    eps = setup.epsilon if epsilon is None else epsilon
    s = setup.seed if seed is None else seed
    return add_noise(incident_trace(setup), eps, s, disc.near.weights, setup.noise_model).f1_eps


def morozov(setup: Setup, f1) -> MorozovSolution:
    _, fac = operator_for(setup)
    return morozov_find(fac, f1, setup.delta, window=setup.window, tol=setup.tol, max_iter=setup.max_iter)


@dataclass
class ControlResult:
    """Clean and noisy Morozov solutions for one setup."""

    clean: MorozovSolution
    noisy: MorozovSolution
    f1_norm: float
    near_norm: float
    antenna_weights: np.ndarray = field(repr=False, default=None)

    @property
    def abs_sensitivity(self) -> float:
        return weighted_norm(self.noisy.phi_alpha - self.clean.phi_alpha, self.antenna_weights)

    @property
    def rel_sensitivity(self) -> float:
        """Density change relative to the clean density."""
        return self.abs_sensitivity / self.clean.phi_norm

    @property
    def stability_ratio(self) -> float:
        """Density change relative to the noisy density."""
        return self.abs_sensitivity / self.noisy.phi_norm


def solve_setup(setup: Setup) -> ControlResult:
    A, fac = operator_for(setup)
    f1 = incident_trace(setup)
    clean = morozov(setup, f1)
    noisy = morozov(setup, noisy_trace(setup)) if setup.epsilon > 0 else clean
    return ControlResult(
        clean=clean,
        noisy=noisy,
        f1_norm=weighted_norm(f1, A.near_weights),
        near_norm=fac.near_norm(),
        antenna_weights=A.antenna_weights,
    )


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    base: Setup
    axis1: str
    grid1: Tuple[float, ...]
    axis2: str
    grid2: Tuple[float, ...]

    def __post_init__(self):
        if self.axis1 == self.axis2:
            raise ValueError("sweep axes must be distinct")
        for name, grid in ((self.axis1, self.grid1), (self.axis2, self.grid2)):
            if name not in AXES:
                raise ValueError(f"unknown sweep axis {name!r}; choose from {AXES}")
            if len(grid) == 0:
                raise ValueError(f"empty grid for axis {name!r}")
            if name == "d" and min(grid) < MIN_DISTANCE * (1 - 1e-9):
                raise ValueError(f"distance grid goes below {MIN_DISTANCE:g}")

    def cells(self):
        for (i, v1), (j, v2) in itertools.product(enumerate(self.grid1), enumerate(self.grid2)):
            yield i, j, v1, v2


@dataclass
class SweepCell:
    i: int
    j: int
    value1: float
    value2: float
    status: str = "ok"
    message: str = ""
    near_rel: float = math.nan
    far_avg: float = math.nan
    phi_norm: float = math.nan
    alpha: float = math.nan
    alpha_eps: float = math.nan
    rel_sensitivity: float = math.nan
    abs_sensitivity: float = math.nan
    newton_iters: int = 0
    discrepancy_error: float = math.nan


SWEEP_COLUMNS = [
    "i", "j", "value1", "value2", "status", "near_rel", "far_avg", "phi_norm", "alpha",
    "alpha_eps", "rel_sensitivity", "abs_sensitivity", "newton_iters", "discrepancy_error", "message",
]


def _run_cell(spec: SweepSpec, i, j, v1, v2) -> SweepCell:
    cell = SweepCell(i, j, float(v1), float(v2))
    try:
        setup = spec.base.with_axis(spec.axis1, v1).with_axis(spec.axis2, v2)
        res = solve_setup(setup)
    except (MorozovError, ValueError) as exc:
        cell.status = "failed"
        cell.message = str(exc)
        return cell
    c = res.clean
    cell.near_rel = c.near_rel
    cell.far_avg = c.far_avg
    cell.phi_norm = c.phi_norm
    cell.alpha = c.alpha
    cell.alpha_eps = res.noisy.alpha
    cell.rel_sensitivity = res.rel_sensitivity
    cell.abs_sensitivity = res.abs_sensitivity
    cell.newton_iters = c.newton_iters + res.noisy.newton_iters
    cell.discrepancy_error = max(abs(c.f_value), abs(res.noisy.f_value))
    if not (c.converged and res.noisy.converged):
        cell.status = "unconverged"
    return cell


def run_sweep(spec: SweepSpec, threads: int = 1) -> List[SweepCell]:
    """Evaluate every grid cell; failures are recorded in the cell, not raised.

    Each cell draws its noise from the run seed afresh, so results do not
    depend on the order or parallel schedule of the cells.
    """
    cells = list(spec.cells())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda c: _run_cell(spec, *c), cells))
    return [_run_cell(spec, *c) for c in cells]


# -- monotonicity threshold scan ---------------------------------------------

@dataclass
class PkRow:
    k: float
    neg_pk: float
    morozov_alpha: float
    alpha_clean: float
    flagged: bool = False
    status: str = "ok"


def monotone_threshold(alphas: np.ndarray, values: np.ndarray) -> Tuple[float, bool]:
    """Smallest grid ``alpha`` above which ``values`` increase strictly.

    Returns ``(threshold, flagged)``; ``flagged`` is true when the sequence
    is increasing over the whole grid, in which case the threshold is the
    grid floor.
    """
    drops = np.flatnonzero(np.diff(values) <= 0)
    if drops.size == 0:
        return float(alphas[0]), True
    return float(alphas[drops[-1] + 1]), False


def pk_scan(
    setup: Setup,
    k_grid: Sequence[float],
    epsilon: Optional[float] = None,
    window: Tuple[float, float] = (1e-9, 1.0),
    per_decade: int = 200,
    threads: int = 1,
) -> List[PkRow]:
    """For each ``k``: threshold exponent of monotonicity of ``E`` and the Morozov ``alpha``."""
    eps = setup.epsilon if epsilon is None else epsilon
    lo, hi = (math.log10(w) for w in window)
    n = int(round((hi - lo) * per_decade)) + 1
    alphas = np.logspace(lo, hi, n)

    def row(k):
        s = replace(setup, k=float(k), epsilon=eps)
        _, fac = operator_for(s)
        f_eps = noisy_trace(s)
        fun = DiscrepancyFunction(fac, f_eps, s.delta)
        energy = np.array([fun.energy(a) for a in alphas])
        threshold, flagged = monotone_threshold(alphas, energy)
        try:
            a_eps = morozov(s, f_eps).alpha
            a0 = morozov(s, incident_trace(s)).alpha
            status = "ok"
        except MorozovError as exc:
            a_eps = a0 = math.nan
            status = f"failed: {exc}"
        return PkRow(float(k), math.log10(threshold), a_eps, a0, flagged, status)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, k_grid))
    return [row(k) for k in k_grid]


# -- stability ---------------------------------------------------------------

@dataclass
class StabilityRecord:
    epsilon: float
    seed: int
    alpha0: float
    alpha_eps: float
    ratio: float
    rel_change: float
    prop_rhs: float
    sqrt_bound: float = math.nan
    status: str = "ok"


@dataclass
class StabilityReport:
    records: List[StabilityRecord]
    slope: float
    c_fit: float
    sqrt_bound_holds: bool
    prop_bound_holds: bool
    near_norm: float


def proposition_rhs(alpha0, alpha_eps, epsilon, delta, near_norm, c=1.0) -> float:
    """Upper bound on ``||phi_eps - phi_0|| / ||phi_eps||`` from the quadratic inequality

        A^2 - |alpha_eps/alpha_0 - 1| A - 16 ||K1*||^2 eps (2 delta + C delta eps + C eps) / alpha_0 <= 0.

    ``c`` bounds ``||s|| / ||f1||`` for the perturbation ``s``; it is 1 for
    the normalised noise used here.
    """
    b = abs(alpha_eps / alpha0 - 1)
    q = 16 * near_norm**2 * epsilon * (2 * delta + c * delta * epsilon + c * epsilon) / alpha0
    return 0.5 * (b + math.sqrt(b * b + 4 * q))


def stability_check(
    setup: Setup,
    eps_grid: Sequence[float],
    seeds: Sequence[int],
    threads: int = 1,
) -> StabilityReport:
    """Measure the density change against noise level and fit ``A <= C sqrt(eps)``."""
    A, fac = operator_for(setup)
    near_norm = fac.near_norm()
    clean = morozov(setup, incident_trace(setup))

    def record(item):
        eps, seed = item
        try:
            noisy = morozov(setup, noisy_trace(setup, eps, seed))
        except MorozovError as exc:
            return StabilityRecord(eps, seed, clean.alpha, math.nan, math.nan, math.nan, math.nan,
                                   status=f"failed: {exc}")
        diff = weighted_norm(noisy.phi_alpha - clean.phi_alpha, A.antenna_weights)
        return StabilityRecord(
            epsilon=float(eps),
            seed=int(seed),
            alpha0=clean.alpha,
            alpha_eps=noisy.alpha,
            ratio=diff / noisy.phi_norm,
            rel_change=diff / clean.phi_norm,
            prop_rhs=proposition_rhs(clean.alpha, noisy.alpha, eps, setup.delta, near_norm),
        )

    items = list(itertools.product(eps_grid, seeds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(record, items))
    else:
        records = [record(it) for it in items]

    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise MorozovError("stability check: every noise level failed")
    eps_ok = np.array([r.epsilon for r in ok])
    ratio_ok = np.array([r.ratio for r in ok])
    c_fit = float(np.max(ratio_ok / np.sqrt(eps_ok)))
    for r in ok:
        r.sqrt_bound = c_fit * math.sqrt(r.epsilon)
    levels = np.unique(eps_ok)
    means = np.array([ratio_ok[eps_ok == e].mean() for e in levels])
    slope = float(np.polyfit(np.log(levels), np.log(means), 1)[0]) if len(levels) > 1 else math.nan
    return StabilityReport(
        records=records,
        slope=slope,
        c_fit=c_fit,
        sqrt_bound_holds=bool(np.all(ratio_ok <= c_fit * np.sqrt(eps_ok) * (1 + 1e-12))),
        prop_bound_holds=all(r.ratio <= r.prop_rhs for r in ok),
        near_norm=near_norm,
    )


# -- singular values ---------------------------------------------------------

def operator_spectrum(setup: Setup, count: int = 50) -> np.ndarray:
    """Leading singular values of the discretised operator from L2(antenna) to the product space."""
    A, fac = _operator(setup.geometry, setup.n_a, setup.n_arc1, setup.n_R, float(setup.k), "quadrature")
    if count > len(fac.s):
        raise ValueError(f"requested {count} singular values, only {len(fac.s)} available")
    # ||phi||_L2 = sqrt(antenna length) * ||h|| for the exponential basis
    return fac.s[:count] / math.sqrt(float(A.antenna_weights.sum()))


@dataclass
class SvdStudy:
    spectra: Dict[float, np.ndarray]
    surface: List[Tuple[float, float, float, float]]


def svd_study(setup: Setup, d_grid: Sequence[float], k_grid: Sequence[float], count: int = 50,
              threads: int = 1) -> SvdStudy:
    """Spectra per distance at ``setup.k`` and ``(sigma_1, (sigma_1 - sigma_6)/sigma_1)`` over (d, k)."""
    spectra = {float(d): operator_spectrum(setup.with_axis("d", d), count) for d in d_grid}

    def cell(item):
        d, k = item
        s = operator_spectrum(setup.with_axis("d", d).with_axis("k", k), 6)
        return float(d), float(k), float(s[0]), float((s[0] - s[5]) / s[0])

    items = list(itertools.product(d_grid, k_grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            surface = list(pool.map(cell, items))
    else:
        surface = [cell(it) for it in items]
    return SvdStudy(spectra, surface)


def lemma_check(setup: Setup, result: Optional[ControlResult] = None):
    """Lemma bounds for the noisy Morozov solution of ``setup``.

    Norms are taken in the regularisation inner product, the one in which
    the bounds are derived.  Pass ``result`` to reuse an existing solve.
    """
    res = solve_setup(setup) if result is None else result
    _, fac = operator_for(setup)
    f_eps = noisy_trace(setup)
    f_norm = float(np.linalg.norm(fac.sqrt_w[: len(f_eps)] * f_eps))
    return lemma_bounds_check(res.noisy, f_norm, setup.delta, res.near_norm)
