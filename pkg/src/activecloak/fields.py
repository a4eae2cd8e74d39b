"""Incident point-source traces, seeded noise and controlled-field evaluation."""

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import BoundarySamples, MIN_DISTANCE
from .operator import SINGULAR_DISTANCE, SingularityError, kernel_matrix, weighted_norm
from .specfun import hankel1_0

NOISE_MODELS = ("standard", "lemma34")


class ProximityError(ValueError):
    """Evaluation point inside the exclusion band around the antenna."""


@dataclass(frozen=True)
class IncidentField:
    """Point source ``(i/4) H_0^(1)(k |x - x0|)``."""

    source: tuple = (10000.0, 0.0)
    k: float = 10.0
    kind: str = "point_source"

    def __post_init__(self):
        if self.kind != "point_source":
            raise ValueError(f"unsupported incident field kind {self.kind!r}")
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")

    def check_outside(self, far_radius):
        if np.hypot(*self.source) <= far_radius:
            warnings.warn(
                f"source point {self.source} lies inside the far circle R={far_radius}",
                stacklevel=2,
            )


def trace_point_source(field: IncidentField, samples) -> np.ndarray:
    pts = samples.points if isinstance(samples, BoundarySamples) else np.asarray(samples, dtype=float)
    r = np.hypot(*(pts - np.asarray(field.source, dtype=float)).T)
    if np.any(r < SINGULAR_DISTANCE):
        raise SingularityError("sample point coincides with the source point")
    return 0.25j * hankel1_0(field.k * r)


@dataclass(frozen=True)
class NoisyData:
    f1: np.ndarray
    f1_eps: np.ndarray
    epsilon: float
    seed: int
    model: str = "standard"


def unit_noise(n, seed, weights=None) -> np.ndarray:
    """Complex uniform(-1, 1) noise normalised to unit (weighted) norm.

    Drawn from numpy's PCG64 generator seeded with ``seed``; real parts
    first, then imaginary parts.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    nu = rng.uniform(-1.0, 1.0, n) + 1j * rng.uniform(-1.0, 1.0, n)
    w = np.ones(n) if weights is None else weights
    return nu / weighted_norm(nu, w)


def add_noise(f1, epsilon, seed, weights=None, model="standard") -> NoisyData:
    """Perturb ``f1`` by a relative amount ``epsilon``.

    ``standard``: ``f1 + epsilon * eta * ||f1||`` with ``||eta|| = 1``.
    ``lemma34``: ``f1 + epsilon * s`` with ``s = f1 + (epsilon/2) eta ||f1||``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if model not in NOISE_MODELS:
        raise ValueError(f"unknown noise model {model!r}; choose from {NOISE_MODELS}")
    f1 = np.asarray(f1, dtype=complex)
    if epsilon == 0:
        return NoisyData(f1, f1.copy(), 0.0, seed, model)
    w = np.ones(len(f1)) if weights is None else np.asarray(weights)
    eta = unit_noise(len(f1), seed, w)
    scale = weighted_norm(f1, w)
    if model == "standard":
        noisy = f1 + epsilon * scale * eta
    else:
        noisy = f1 + epsilon * (f1 + 0.5 * epsilon * scale * eta)
    return NoisyData(f1, noisy, float(epsilon), seed, model)


def evaluate_field(h, antenna: BoundarySamples, points, k, min_distance=MIN_DISTANCE, threads=1) -> np.ndarray:
    """Double layer potential of the density with mode coefficients ``h``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    h = np.asarray(h)
    if len(pts) == 0:
        return np.zeros(0, dtype=complex)
    dist = np.min(np.hypot(pts[:, None, 0] - antenna.points[None, :, 0],
                           pts[:, None, 1] - antenna.points[None, :, 1]), axis=1)
    bad = np.flatnonzero(dist < min_distance * (1 - 1e-9))
    if bad.size:
        raise ProximityError(
            f"point {tuple(pts[bad[0]])} is {dist[bad[0]]:.3g} from the antenna (< {min_distance:g})"
        )
    n = len(antenna)
    phi = n * np.fft.ifft(h, n=n)
    return kernel_matrix(pts, antenna, k, threads=threads) @ (antenna.weights * phi)
