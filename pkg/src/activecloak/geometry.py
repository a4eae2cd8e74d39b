"""Antenna, control region and far circle: parametrisation and quadrature.

Every boundary is sampled with a left-endpoint rule.  Sample weights are
arc-length measures, so ``sum(weights)`` is the boundary length and
``sqrt(weights) * values`` has Euclidean norm equal to the boundary L2 norm.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

MIN_DISTANCE = 1e-3
"""Smallest admissible gap between the control region and the antenna."""


class GeometryError(ValueError):
    """Invalid geometry or sampling request."""


@dataclass(frozen=True)
class Geometry:
    """Circular antenna of radius ``a``, annular sector control region
    ``r1 <= r <= r2, theta1 <= theta <= theta2``, far circle of radius ``R``.
    """

    a: float = 0.01
    r1: float = 0.011
    r2: float = 0.015
    theta1: float = 3 * np.pi / 4
    theta2: float = 5 * np.pi / 4
    R: float = 10.0

    def __post_init__(self):
        if not 0 < self.a < self.r1 < self.r2 < self.R:
            raise GeometryError(
                "need 0 < a < r1 < r2 < R, got "
                f"a={self.a}, r1={self.r1}, r2={self.r2}, R={self.R}"
            )
        if not self.theta1 < self.theta2 <= self.theta1 + 2 * np.pi:
            raise GeometryError(
                f"need theta1 < theta2 <= theta1 + 2pi, got {self.theta1}, {self.theta2}"
            )
        # relative slack so that r1 = a + 1e-3 typed as decimals is accepted
        if self.distance < MIN_DISTANCE * (1 - 1e-9):
            raise GeometryError(
                f"antenna/control distance r1 - a = {self.distance:g} is below {MIN_DISTANCE:g}"
            )

    @property
    def distance(self) -> float:
        return self.r1 - self.a

    @property
    def control_perimeter(self) -> float:
        span = self.theta2 - self.theta1
        sides = 0.0 if np.isclose(span, 2 * np.pi) else 2 * (self.r2 - self.r1)
        return (self.r1 + self.r2) * span + sides

    def with_distance(self, d: float) -> "Geometry":
        """Shift the control sector radially so that ``r1 - a = d``, keeping its width."""
        width = self.r2 - self.r1
        return Geometry(self.a, self.a + d, self.a + d + width, self.theta1, self.theta2, self.R)

    def with_far_radius(self, R: float) -> "Geometry":
        return Geometry(self.a, self.r1, self.r2, self.theta1, self.theta2, R)


@dataclass(frozen=True)
class BoundarySamples:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    tau: Optional[np.ndarray] = None
    pieces: Tuple[int, ...] = field(default=())

    def __len__(self):
        return len(self.weights)

    @property
    def length(self) -> float:
        return float(self.weights.sum())


def _unit(angle):
    return np.column_stack([np.cos(angle), np.sin(angle)])


def _check_count(n, name, minimum=8):
    if int(n) != n or n < minimum:
        raise GeometryError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


RadiusFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def sample_antenna(geom: Geometry, n_a: int, radius: Optional[RadiusFunction] = None) -> BoundarySamples:
    """Sample the antenna at ``tau_j = 2 pi j / n_a``.

    ``radius`` maps ``tau`` to ``(s(tau), s'(tau))`` for a star-shaped
    antenna; the default is the circle ``s = geom.a``.  The Jacobian
    ``sqrt(s^2 + s'^2)`` is folded into the weights.
    """
    n_a = _check_count(n_a, "n_a", minimum=4)
    if n_a & (n_a - 1):
        raise GeometryError(f"n_a must be a power of two, got {n_a}")
    tau = 2 * np.pi * np.arange(n_a) / n_a
    if radius is None:
        s = np.full(n_a, geom.a)
        ds = np.zeros(n_a)
    else:
        s, ds = (np.asarray(v, dtype=float) for v in radius(tau))
    that = _unit(tau)
    tperp = np.column_stack([-np.sin(tau), np.cos(tau)])
    jac = np.hypot(s, ds)
    normals = (s[:, None] * that - ds[:, None] * tperp) / jac[:, None]
    return BoundarySamples(
        points=s[:, None] * that,
        normals=normals,
        weights=jac * (2 * np.pi / n_a),
        tau=tau,
        pieces=(n_a,),
    )


def _arc(r, start, stop, n, outward):
    theta = start + (stop - start) * np.arange(n) / n
    pts = r * _unit(theta)
    nrm = _unit(theta) * (1.0 if outward else -1.0)
    return pts, nrm, np.full(n, r * abs(stop - start) / n)


def _segment(theta, r_from, r_to, n, normal):
    r = r_from + (r_to - r_from) * np.arange(n) / n
    pts = r[:, None] * _unit(np.array([theta]))
    nrm = np.tile(normal, (n, 1))
    return pts, nrm, np.full(n, abs(r_to - r_from) / n)


def sample_control(geom: Geometry, n_arc1: int) -> BoundarySamples:
    """Sample the closed boundary of the annular sector.

    The curve is traversed inner arc (theta1 -> theta2), radial side at
    theta2 (outwards), outer arc (theta2 -> theta1), radial side at theta1
    (inwards).  Each piece is half-open so corners appear once.  The spacing
    on the last three pieces matches ``h = r1 (theta2 - theta1) / n_arc1``
    as closely as integer counts allow.
    """
    n_arc1 = _check_count(n_arc1, "n_arc1")
    g = geom
    span = g.theta2 - g.theta1
    h = g.r1 * span / n_arc1
    n_outer = max(1, int(round(g.r2 * span / h)))
    n_side = max(1, int(round((g.r2 - g.r1) / h)))

    parts = [_arc(g.r1, g.theta1, g.theta2, n_arc1, outward=False)]
    closed = np.isclose(span, 2 * np.pi)
    if not closed:
        n2 = np.array([-np.sin(g.theta2), np.cos(g.theta2)])
        parts.append(_segment(g.theta2, g.r1, g.r2, n_side, n2))
    parts.append(_arc(g.r2, g.theta2, g.theta1, n_outer, outward=True))
    if not closed:
        n1 = np.array([np.sin(g.theta1), -np.cos(g.theta1)])
        parts.append(_segment(g.theta1, g.r2, g.r1, n_side, n1))

    return BoundarySamples(
        points=np.concatenate([p[0] for p in parts]),
        normals=np.concatenate([p[1] for p in parts]),
        weights=np.concatenate([p[2] for p in parts]),
        pieces=tuple(len(p[2]) for p in parts),
    )


def sample_far_circle(geom: Geometry, n_R: int) -> BoundarySamples:
    """Equally spaced samples on the circle of radius ``geom.R``."""
    n_R = _check_count(n_R, "n_R", minimum=4)
    theta = 2 * np.pi * np.arange(n_R) / n_R
    return BoundarySamples(
        points=geom.R * _unit(theta),
        normals=_unit(theta),
        weights=np.full(n_R, 2 * np.pi * geom.R / n_R),
        tau=theta,
        pieces=(n_R,),
    )
