"""Tikhonov regularisation with a weighted Morozov discrepancy principle.

The regularised coefficients minimise

    ||A h - f||_W^2 + alpha ||h||^2

over the stacked collocation values (``W`` = identity unless quadrature
weighting is requested).  The parameter ``alpha`` is then chosen so that
the weighted residual

    E = ||A_near h - f1||^2 / ||f1||^2 + ||A_far h - f2||^2 / (2 pi R)

equals ``delta^2``.  Norms in ``E`` are quadrature-weighted boundary L2
norms.  Everything is evaluated through one SVD of ``W^(1/2) A`` so that
many ``alpha`` values are cheap.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .operator import OperatorMatrix, density_samples, weighted_norm

log = logging.getLogger(__name__)

DEFAULT_WINDOW = (1e-8, 1.0)
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50
COARSE_POINTS = 60


class MorozovError(RuntimeError):
    """No root of the discrepancy function in the search window."""

    def __init__(self, message, f_lo=None, f_hi=None):
        super().__init__(message)
        self.f_lo = f_lo
        self.f_hi = f_hi


WEIGHTINGS = ("euclidean", "quadrature")


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``S A = U diag(s) V^H`` of the row-scaled collocation matrix.

    ``S = diag(sqrt_w)`` fixes the inner product of the data space used by the
    regularisation: unit weights (``euclidean``, the default) or quadrature
    weights (``quadrature``).  The discrepancy ``E`` always uses quadrature
    weights, carried separately in ``near_weights``/``far_weights``.
    """

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    sqrt_w: np.ndarray
    rows_near: int
    far_radius: float
    antenna_weights: np.ndarray
    near_weights: np.ndarray
    far_weights: np.ndarray
    weighting: str = "euclidean"

    @classmethod
    def from_operator(cls, A: OperatorMatrix, weighting="euclidean") -> "SvdFactors":
        if weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")
        sqrt_w = np.sqrt(A.weights) if weighting == "quadrature" else np.ones(len(A.weights))
        u, s, vh = np.linalg.svd(sqrt_w[:, None] * A.entries, full_matrices=False)
        return cls(u, s, vh, sqrt_w, A.rows_near, A.far_radius, A.antenna_weights,
                   A.near_weights, A.far_weights, weighting)

    @property
    def singular_values(self) -> np.ndarray:
        return self.s

    @property
    def matrix(self) -> np.ndarray:
        """The unscaled collocation matrix rebuilt from the factors."""
        return ((self.u * self.s) @ self.vh) / self.sqrt_w[:, None]

    def near_norm(self) -> float:
        """Operator norm of the control-boundary block in the regularisation inner product."""
        block = ((self.u[: self.rows_near] * self.s) @ self.vh)
        return float(np.linalg.norm(block, 2))


def as_factors(A: Union[OperatorMatrix, SvdFactors], weighting="euclidean") -> SvdFactors:
    return A if isinstance(A, SvdFactors) else SvdFactors.from_operator(A, weighting)


def _stack(factors: SvdFactors, f1, f2):
    f1 = np.asarray(f1, dtype=complex)
    n_far = len(factors.sqrt_w) - factors.rows_near
    f2 = np.zeros(n_far, dtype=complex) if f2 is None else np.asarray(f2, dtype=complex)
    if f1.shape != (factors.rows_near,) or f2.shape != (n_far,):
        raise ValueError(
            f"data blocks must have lengths {factors.rows_near} and {n_far}, got {f1.shape}, {f2.shape}"
        )
    return np.concatenate([f1, f2])


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")


def tikhonov_solve(A, f1, alpha, f2=None):
    """Regularised coefficients ``(A^H W A + alpha I)^{-1} A^H W f``.

    ``W`` is the regularisation weighting of the factors (identity by
    default).  Evaluated spectrally as
    ``sum_i s_i / (s_i^2 + alpha) <u_i, W^(1/2) f> v_i``.
    """
    _check_alpha(alpha)
    fac = as_factors(A)
    g = fac.sqrt_w * _stack(fac, f1, f2)
    c = fac.u.conj().T @ g
    return fac.vh.conj().T @ (fac.s / (fac.s**2 + alpha) * c)


def discrepancy(A: OperatorMatrix, f1, f2, h, delta) -> float:
    """``E(h) - delta^2`` with quadrature-weighted norms."""
    f1 = np.asarray(f1)
    f1_norm = weighted_norm(f1, A.near_weights)
    if not f1_norm > 0:
        raise ValueError("f1 has zero norm")
    f2 = np.zeros(A.rows_far) if f2 is None else np.asarray(f2)
    near, far = A.split(A.entries @ np.asarray(h))
    e = (weighted_norm(near - f1, A.near_weights) / f1_norm) ** 2
    e += weighted_norm(far - f2, A.far_weights) ** 2 / (2 * np.pi * A.far_radius)
    return e - delta**2


class DiscrepancyFunction:
    """``F(alpha) = E(h_alpha, f) - delta^2`` and its derivative for fixed data.

    ``norm="quadrature"`` measures ``E`` with boundary L2 norms;
    ``norm="regularization"`` measures it in the inner product of the
    Tikhonov functional, which is the setting where the closed-form
    derivative :meth:`closed_form_derivative` is exact.
    """

    def __init__(self, A, f1, delta, f2=None, norm="quadrature"):
        self.factors = fac = as_factors(A)
        self.delta = float(delta)
        self.f = _stack(fac, f1, f2)
        self.g = fac.sqrt_w * self.f
        self.c = fac.u.conj().T @ self.g
        n = fac.rows_near
        if norm == "quadrature":
            wn, wf = fac.near_weights, fac.far_weights
        elif norm == "regularization":
            wn, wf = fac.sqrt_w[:n] ** 2, fac.sqrt_w[n:] ** 2
        else:
            raise ValueError(f"unknown norm {norm!r}")
        self.f1_norm_sq = float(np.sum(wn * np.abs(self.f[:n]) ** 2))
        if not self.f1_norm_sq > 0:
            raise ValueError("f1 has zero norm")
        self.w_far = 1.0 / (2 * np.pi * fac.far_radius)
        # row weights of E: residual r enters as sum(e_weights * |r|^2)
        self.e_weights = np.concatenate([wn / self.f1_norm_sq, wf * self.w_far])

    def coefficients(self, alpha):
        _check_alpha(alpha)
        s = self.factors.s
        return self.factors.vh.conj().T @ (s / (s**2 + alpha) * self.c)

    def residual(self, alpha):
        """``A h_alpha - f`` at the collocation points."""
        _check_alpha(alpha)
        fac = self.factors
        s = fac.s
        return (fac.u @ (s**2 / (s**2 + alpha) * self.c)) / fac.sqrt_w - self.f

    def residual_terms(self, alpha) -> Tuple[float, float]:
        """Return ``(near_rel^2, far_avg^2)`` at ``alpha``."""
        r2 = self.e_weights * np.abs(self.residual(alpha)) ** 2
        n = self.factors.rows_near
        return float(r2[:n].sum()), float(r2[n:].sum())

    def energy(self, alpha) -> float:
        near, far = self.residual_terms(alpha)
        return near + far

    def __call__(self, alpha) -> float:
        return self.energy(alpha) - self.delta**2

    def _dh(self, alpha, h):
        fac = self.factors
        return -(fac.vh.conj().T @ ((fac.vh @ h) / (fac.s**2 + alpha)))

    def derivative(self, alpha, h=None) -> float:
        """Exact ``dF/dalpha = 2 Re <h', A^H D (A h - f)>``.

        ``D`` holds the row weights of ``E`` and
        ``h' = -(A^H W A + alpha I)^{-1} h``.
        """
        fac = self.factors
        if h is None:
            h = self.coefficients(alpha)
        dh = self._dh(alpha, h)
        r = (fac.u @ (fac.s * (fac.vh @ h))) / fac.sqrt_w - self.f
        grad = fac.vh.conj().T @ (fac.s * (fac.u.conj().T @ (self.e_weights * r / fac.sqrt_w)))
        return float(2 * np.vdot(dh, grad).real)

    def closed_form_derivative(self, alpha, h=None) -> float:
        """Closed form

            -2 alpha / ||f1||^2 Re(h', h)
            + (1/(pi R) - 2/||f1||^2) Re(h', A_far^* (A_far h - f2))

        with adjoints and norms taken in the regularisation inner product.
        Agrees with :meth:`derivative` when ``norm="regularization"``.
        """
        fac = self.factors
        if h is None:
            h = self.coefficients(alpha)
        dh = self._dh(alpha, h)
        n = fac.rows_near
        b_far = (fac.u[n:] * fac.s) @ fac.vh
        far_grad = b_far.conj().T @ (b_far @ h - self.g[n:])
        f1_sq = float(np.sum(np.abs(self.g[:n]) ** 2))
        term1 = -2 * alpha / f1_sq * np.vdot(dh, h).real
        term2 = (1.0 / (math.pi * fac.far_radius) - 2 / f1_sq) * np.vdot(dh, far_grad).real
        return float(term1 + term2)


def discrepancy_derivative(A, f1, alpha, delta=0.0, f2=None, h=None) -> float:
    """Derivative of ``F`` in ``alpha`` (``delta`` does not enter)."""
    return DiscrepancyFunction(A, f1, delta, f2).derivative(alpha, h)


@dataclass
class MorozovSolution:
    alpha: float
    h_alpha: np.ndarray
    phi_alpha: np.ndarray
    near_rel: float
    far_avg: float
    discrepancy: float
    phi_norm: float
    newton_iters: int
    bisection_steps: int = 0
    f_value: float = 0.0
    converged: bool = True

    @property
    def coefficient_norm(self) -> float:
        return float(np.linalg.norm(self.h_alpha))

    def summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "near_rel": self.near_rel,
            "far_avg": self.far_avg,
            "discrepancy": self.discrepancy,
            "f_value": self.f_value,
            "phi_norm": self.phi_norm,
            "coefficient_norm": self.coefficient_norm,
            "newton_iters": self.newton_iters,
            "bisection_steps": self.bisection_steps,
            "converged": self.converged,
        }


def _bracket(fun: DiscrepancyFunction, window, n_coarse):
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"invalid alpha window {window!r}")
    grid = np.logspace(math.log10(lo), math.log10(hi), n_coarse)
    values = [fun(a) for a in grid]
    # scan from the top so the largest root is bracketed
    for i in range(n_coarse - 1, 0, -1):
        if values[i] > 0 and values[i - 1] <= 0:
            return grid[i - 1], grid[i], values[i - 1], values[i]
    raise MorozovError(
        f"no sign change of F in [{lo:g}, {hi:g}]: F(lo)={values[0]:.3e}, F(hi)={values[-1]:.3e}",
        f_lo=values[0],
        f_hi=values[-1],
    )


def morozov_find(
    A,
    f1,
    delta,
    window=DEFAULT_WINDOW,
    f2=None,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    n_coarse=COARSE_POINTS,
) -> MorozovSolution:
    """Largest ``alpha`` in ``window`` with ``E(h_alpha, f) = delta^2``.

    A logarithmic coarse search brackets the sign change closest to the top
    of the window; Newton's method then refines it.  Newton steps leaving
    the bracket are replaced by bisection, and the bracket shrinks with
    every evaluation, so the iteration always terminates inside it.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    fun = DiscrepancyFunction(A, f1, delta, f2)
    fac = fun.factors
    lo, hi, f_lo, f_hi = _bracket(fun, window, n_coarse)

    alpha, value = hi, f_hi
    iters = bisections = 0
    while abs(value) > tol and iters < max_iter:
        iters += 1
        slope = fun.derivative(alpha)
        step = alpha - value / slope if slope != 0 else math.nan
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
            bisections += 1
        alpha = step
        value = fun(alpha)
        if value > 0:
            hi = alpha
        else:
            lo = alpha
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    converged = abs(value) <= tol
    if not converged:
        log.warning("Morozov iteration stopped at |F| = %.3e after %d steps", abs(value), iters)

    h = fun.coefficients(alpha)
    near_sq, far_sq = fun.residual_terms(alpha)
    phi = density_samples(h)
    return MorozovSolution(
        alpha=float(alpha),
        h_alpha=h,
        phi_alpha=phi,
        near_rel=math.sqrt(near_sq),
        far_avg=math.sqrt(far_sq),
        discrepancy=near_sq + far_sq,
        phi_norm=weighted_norm(phi, fac.antenna_weights),
        newton_iters=iters,
        bisection_steps=bisections,
        f_value=float(value),
        converged=converged,
    )


def consistency_warning(f1_norm, far_radius, delta, mu=1.0) -> Optional[str]:
    """Message if ``delta^2 > mu^2 min(1/(2||f1||^2), 1/(4 pi R))``, else ``None``."""
    bound = mu**2 * min(1 / (2 * f1_norm**2), 1 / (4 * math.pi * far_radius))
    if delta**2 > bound:
        return f"delta^2 = {delta**2:.3g} exceeds the accuracy bound {bound:.3g}"
    return None


def singular_spectrum(A, count=None) -> np.ndarray:
    """Leading singular values of the row-weighted operator."""
    s = as_factors(A).s
    if count is not None:
        if count > len(s):
            raise ValueError(f"requested {count} singular values, only {len(s)} available")
        s = s[:count]
    return s.copy()


@dataclass
class LemmaBounds:
    skipped: bool
    f1_bound_holds: Optional[bool] = None
    alpha_bound_holds: Optional[bool] = None
    f1_slack: Optional[float] = None
    alpha_slack: Optional[float] = None
    near_norm: Optional[float] = None
    reason: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lemma_bounds_check(solution: MorozovSolution, f1_norm, delta, near_norm) -> LemmaBounds:
    """Check ``||f1|| <= 4 ||K1*|| ||h||`` and ``alpha <= 4 delta ||K1*||^2``.

    ``near_norm`` is the largest singular value of the weighted control
    block; ``||h||`` is the coefficient norm the regularisation penalises.
    The bounds are only claimed for ``delta < 1/sqrt(2)``.
    """
    if not delta < 1 / math.sqrt(2):
        return LemmaBounds(skipped=True, near_norm=near_norm, reason="delta >= 1/sqrt(2)")
    rhs1 = 4 * near_norm * solution.coefficient_norm
    rhs2 = 4 * delta * near_norm**2
    return LemmaBounds(
        skipped=False,
        f1_bound_holds=bool(f1_norm <= rhs1),
        alpha_bound_holds=bool(solution.alpha <= rhs2),
        f1_slack=float(rhs1 - f1_norm),
        alpha_slack=float(rhs2 - solution.alpha),
        near_norm=float(near_norm),
    )
