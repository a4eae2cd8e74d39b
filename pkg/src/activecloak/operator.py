"""Collocation matrix of the double layer potential restricted to the
control boundary and the far circle.

Rows are collocation points (control boundary first, then far circle);
column ``l`` is the potential generated by the antenna density
``exp(i l tau)``.  Two assembly routes are provided: an explicit quadrature
sum and the row-wise DFT of the kernel samples.  They agree to rounding.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import BoundarySamples
from .specfun import hankel1_pair

SINGULAR_DISTANCE = 1e-12
_ROW_CHUNK = 64


class SingularityError(ValueError):
    """A collocation point coincides with a kernel source point."""


def kernel(x, y, normal_y, k):
    """Normal derivative in ``y`` of ``(i/4) H_0^(1)(k|x - y|)``.

    Broadcasts over leading dimensions of ``x``, ``y`` and ``normal_y``
    (last axis of length 2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    normal_y = np.asarray(normal_y, dtype=float)
    diff = y - x
    r = np.hypot(diff[..., 0], diff[..., 1])
    if np.any(r < SINGULAR_DISTANCE):
        raise SingularityError(f"kernel evaluated at |x - y| = {r.min():.3g}")
    _, h1 = hankel1_pair(k * r)
    proj = (diff * normal_y).sum(axis=-1) / r
    # H0' = -H1
    val = -0.25j * k * h1 * proj
    return complex(val) if val.ndim == 0 else val


def kernel_dk(x, y, normal_y, k):
    """Derivative of :func:`kernel` with respect to the wavenumber."""
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = np.hypot(diff[..., 0], diff[..., 1])
    h0, _ = hankel1_pair(k * r)
    proj = (diff * np.asarray(normal_y, dtype=float)).sum(axis=-1) / r
    # d/dk [k H1(kr)] = H1 + k r H1'(kr) = k r H0(kr)
    return -0.25j * k * r * h0 * proj


def kernel_matrix(points, antenna: BoundarySamples, k, threads=1):
    """Kernel values ``kernel(x_j, y_m, nu_m)`` as an ``(n_points, n_a)`` array."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    y = antenna.points[None, :, :]
    nu = antenna.normals[None, :, :]

    def block(lo):
        return kernel(points[lo : lo + _ROW_CHUNK, None, :], y, nu, k)

    starts = range(0, len(points), _ROW_CHUNK)
    if threads > 1 and len(points) > _ROW_CHUNK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(block, starts))
    else:
        blocks = [block(lo) for lo in starts]
    if not blocks:
        return np.zeros((0, len(antenna)), dtype=complex)
    return np.concatenate(blocks, axis=0)


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    rows_near: int
    rows_far: int
    near_weights: np.ndarray
    far_weights: np.ndarray
    antenna_weights: np.ndarray
    tau: np.ndarray
    k: float
    far_radius: float

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def near(self) -> np.ndarray:
        return self.entries[: self.rows_near]

    @property
    def far(self) -> np.ndarray:
        return self.entries[self.rows_near :]

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights of the stacked collocation rows."""
        return np.concatenate([self.near_weights, self.far_weights])

    def split(self, vec):
        vec = np.asarray(vec)
        return vec[: self.rows_near], vec[self.rows_near :]


def _collocation(near: BoundarySamples, far: BoundarySamples):
    return np.concatenate([near.points, far.points]), len(near), len(far)


def _far_radius(far: BoundarySamples) -> float:
    return float(np.hypot(*far.points[0]))


def _check_antenna(antenna: BoundarySamples):
    n = len(antenna)
    if antenna.tau is None or n & (n - 1):
        raise ValueError(f"antenna samples must be a power-of-two tau grid, got {n}")


def positive_dft(w):
    """``[(1/n) sum_j w_j exp(+2 pi i j l / n)]_l`` along the last axis."""
    # numpy's inverse transform carries exactly this sign and 1/n factor
    return np.fft.ifft(w, axis=-1)


def assemble_direct(antenna: BoundarySamples, near: BoundarySamples, far: BoundarySamples, k, threads=1):
    """Entry ``(j, l) = sum_m kernel(x_j, y_m, nu_m) exp(i l tau_m) w_m``."""
    _check_antenna(antenna)
    pts, n_near, n_far = _collocation(near, far)
    kmat = kernel_matrix(pts, antenna, k, threads=threads)
    modes = np.exp(1j * np.outer(antenna.tau, np.arange(len(antenna))))
    entries = (kmat * antenna.weights[None, :]) @ modes
    return OperatorMatrix(
        entries, n_near, n_far, near.weights, far.weights, antenna.weights,
        antenna.tau, float(k), _far_radius(far),
    )


def assemble_dft(antenna: BoundarySamples, near: BoundarySamples, far: BoundarySamples, k, threads=1):
    """Row ``j`` equals ``2 pi * DFT(v_j)`` with ``v_j`` the kernel times Jacobian."""
    _check_antenna(antenna)
    pts, n_near, n_far = _collocation(near, far)
    n_a = len(antenna)
    jacobian = antenna.weights * n_a / (2 * np.pi)
    v = kernel_matrix(pts, antenna, k, threads=threads) * jacobian[None, :]
    entries = 2 * np.pi * positive_dft(v)
    return OperatorMatrix(
        entries, n_near, n_far, near.weights, far.weights, antenna.weights,
        antenna.tau, float(k), _far_radius(far),
    )


def apply(A: OperatorMatrix, h):
    """Return ``(A_near h, A_far h)``."""
    h = np.asarray(h)
    if h.shape != (A.cols,):
        raise ValueError(f"expected coefficient vector of length {A.cols}, got shape {h.shape}")
    return A.split(A.entries @ h)


def weighted_norm(values, weights) -> float:
    """Quadrature approximation of the boundary L2 norm."""
    return float(np.sqrt(np.sum(weights * np.abs(values) ** 2)))


def xi_inner(A: OperatorMatrix, u, v) -> complex:
    """Inner product of the product space L2(control) x L2(far circle)."""
    return complex(np.sum(A.weights * np.asarray(u) * np.conj(v)))


def weighted_norms(A: OperatorMatrix, near_res, far_res, f1_norm):
    """Relative control-boundary residual and circumference-averaged far residual."""
    if not f1_norm > 0:
        raise ValueError("f1_norm must be positive")
    near_rel = weighted_norm(near_res, A.near_weights) / f1_norm
    far_avg = weighted_norm(far_res, A.far_weights) / np.sqrt(2 * np.pi * A.far_radius)
    return near_rel, far_avg


def adjoint_apply(A: OperatorMatrix, psi_near, psi_far):
    """Adjoint of ``A`` from the weighted product space to coefficient space.

    Satisfies ``<A h, psi>_Xi = <h, A* psi>`` with the plain Euclidean
    inner product on coefficient vectors.
    """
    psi_near = np.asarray(psi_near)
    psi_far = np.asarray(psi_far)
    if psi_near.shape != (A.rows_near,) or psi_far.shape != (A.rows_far,):
        raise ValueError(
            f"expected blocks of length {A.rows_near} and {A.rows_far}, "
            f"got {psi_near.shape} and {psi_far.shape}"
        )
    psi = np.concatenate([psi_near, psi_far])
    return A.entries.conj().T @ (A.weights * psi)


def density_samples(h, n_a=None):
    """``phi(tau_m) = sum_l h_l exp(i l tau_m)`` on the equispaced antenna grid."""
    h = np.asarray(h)
    n = len(h) if n_a is None else n_a
    return n * np.fft.ifft(h, n=n)
