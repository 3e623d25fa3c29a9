"""Hyperbolic plane primitives in the Poincare disk model.

Points are handled in two coordinate systems: Euclidean coordinates inside the
open unit disk (:class:`DiskPoint`) and geodesic polar coordinates around the
disk centre (:class:`PolarPoint`, hyperbolic radius and angle).  All heavy
numerics in the package run on polar coordinates through :func:`polar_dist`,
which uses the half-angle form of the law of cosines so that short distances
far from the origin do not cancel catastrophically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

TWO_PI = 2.0 * math.pi

# Euclidean radius beyond which disk coordinates no longer carry useful bits.
BOUNDARY_GUARD = 1.0 - 1e-12

# Above this radius sum the polar distance is evaluated in log space.
_LOG_FORM_THRESHOLD = 50.0


class InvalidPointError(ValueError):
    """Raised for coordinates that do not describe a point of the plane."""


@dataclass(frozen=True)
class DiskPoint:
    """Euclidean coordinates of a point strictly inside the unit disk."""

    u: float
    v: float

    def __post_init__(self) -> None:
        r = math.hypot(self.u, self.v)
        if not math.isfinite(r) or r > BOUNDARY_GUARD:
            raise InvalidPointError(
                f"({self.u}, {self.v}) is not strictly inside the unit disk"
            )

    @property
    def radius(self) -> float:
        return math.hypot(self.u, self.v)


ORIGIN = DiskPoint(0.0, 0.0)


def normalize_angle(phi: float) -> float:
    """Fold an angle into ``[0, 2*pi)``."""
    out = math.fmod(phi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if out >= TWO_PI:
        out = 0.0
    return out


@dataclass(frozen=True)
class PolarPoint:
    """Hyperbolic distance ``rho`` to the origin and angle ``phi``.

    The angle is normalized to ``[0, 2*pi)`` on construction.
    """

    rho: float
    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and self.rho >= 0.0):
            raise InvalidPointError(f"polar radius must be >= 0, got {self.rho}")
        if not math.isfinite(self.phi):
            raise InvalidPointError(f"angle must be finite, got {self.phi}")
        object.__setattr__(self, "phi", normalize_angle(self.phi))


@dataclass(frozen=True)
class GromovProduct:
    value: float
    basepoint: Any


def _check_disk(p: DiskPoint) -> None:
    if not isinstance(p, DiskPoint):
        raise TypeError(f"expected DiskPoint, got {type(p).__name__}")


def dist(p: DiskPoint, q: DiskPoint) -> float:
    """Hyperbolic distance between two disk points.

    Equivalent to ``arcosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2)))`` but written as
    ``2 asinh(|p-q| / sqrt((1-|p|^2)(1-|q|^2)))``, which stays accurate for
    nearby points.
    """
    _check_disk(p)
    _check_disk(q)
    du = p.u - q.u
    dv = p.v - q.v
    chord = math.hypot(du, dv)
    if chord == 0.0:
        return 0.0
    rp = p.radius
    rq = q.radius
    denom = (1.0 - rp) * (1.0 + rp) * (1.0 - rq) * (1.0 + rq)
    return 2.0 * math.asinh(chord / math.sqrt(denom))


def polar_to_disk(p: PolarPoint) -> DiskPoint:
    r = math.tanh(p.rho / 2.0)
    return DiskPoint(r * math.cos(p.phi), r * math.sin(p.phi))


def disk_to_polar(p: DiskPoint) -> PolarPoint:
    r = p.radius
    if r == 0.0:
        return PolarPoint(0.0, 0.0)
    return PolarPoint(2.0 * math.atanh(r), math.atan2(p.v, p.u))


def _log_sinh(x: np.ndarray) -> np.ndarray:
    # log(sinh x) for x > 0 without overflow
    return x - math.log(2.0) + np.log1p(-np.exp(-2.0 * x))


def polar_dist(rho1, phi1, rho2, phi2):
    """Vectorized hyperbolic distance between points given in polar form.

    Uses ``sinh^2(d/2) = sinh^2((r1-r2)/2) + sinh(r1) sinh(r2) sin^2(dphi/2)``.
    Inputs broadcast like numpy arrays.
    """
    rho1, phi1, rho2, phi2 = np.broadcast_arrays(
        np.asarray(rho1, dtype=float),
        np.asarray(phi1, dtype=float),
        np.asarray(rho2, dtype=float),
        np.asarray(phi2, dtype=float),
    )
    half = np.sin(np.abs(phi1 - phi2) / 2.0)
    big = (rho1 + rho2) > _LOG_FORM_THRESHOLD
    if not np.any(big):
        radial = np.sinh((rho1 - rho2) / 2.0)
        x = radial * radial + np.sinh(rho1) * np.sinh(rho2) * half * half
        return 2.0 * np.arcsinh(np.sqrt(x))
    out = np.empty(rho1.shape)
    small = ~big
    radial = np.sinh((rho1[small] - rho2[small]) / 2.0)
    x = radial * radial + np.sinh(rho1[small]) * np.sinh(rho2[small]) * half[small] ** 2
    out[small] = 2.0 * np.arcsinh(np.sqrt(x))
    r1, r2, h = rho1[big], rho2[big], half[big]
    gap = np.abs(r1 - r2) / 2.0
    with np.errstate(divide="ignore"):
        # both radii are large here, so only the gap and the sine can vanish
        log_cross = _log_sinh(r1) + _log_sinh(r2) + 2.0 * np.log(np.abs(h))
        log_radial = 2.0 * np.log(np.sinh(gap))
    log_x = np.logaddexp(log_cross, log_radial)
    # 2 asinh(sqrt(X)) = log(4X) + O(1/X) once X is huge
    out[big] = np.where(
        log_x > 40.0,
        math.log(4.0) + log_x,
        2.0 * np.arcsinh(np.exp(0.5 * np.minimum(log_x, 40.0))),
    )
    return out


def polar_distance(p: PolarPoint, q: PolarPoint) -> float:
    return float(polar_dist(p.rho, p.phi, q.rho, q.phi))


def angle_gap(a, b):
    """Angular difference folded into ``[0, pi]`` (vectorized)."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def dist_to_radial_ray(p: PolarPoint, ray_angle: float) -> float:
    """Distance from ``p`` to the geodesic ray leaving the origin at ``ray_angle``."""
    return float(ray_distance(p.rho, p.phi, ray_angle))


def ray_distance(rho, phi, ray_angle):
    """Vectorized :func:`dist_to_radial_ray`."""
    rho = np.asarray(rho, dtype=float)
    gap = angle_gap(phi, ray_angle)
    inside = np.arcsinh(np.sinh(rho) * np.sin(np.minimum(gap, math.pi / 2.0)))
    return np.where(gap <= math.pi / 2.0, inside, rho)


def arc_length(radius: float, alpha: float) -> float:
    """Length of a circular arc of angular width ``alpha`` at hyperbolic ``radius``."""
    if radius < 0.0:
        raise ValueError("radius must be non-negative")
    if not (0.0 <= alpha <= TWO_PI):
        raise ValueError("alpha must lie in [0, 2*pi]")
    return alpha * math.sinh(radius)


def gromov_product(
    x: Any, y: Any, w: Any, metric: Callable[[Any, Any], float] = dist
) -> GromovProduct:
    """Gromov product ``(x|y)_w`` under an arbitrary metric."""
    dxw = metric(x, w)
    dyw = metric(y, w)
    dxy = metric(x, y)
    value = (dxw + dyw - dxy) / 2.0
    if value < -1e-9:
        raise ValueError(
            f"negative Gromov product {value:.3e}: metric breaks the triangle inequality"
        )
    return GromovProduct(max(value, 0.0), w)


def _mobius(z: complex, a: complex) -> complex:
    # isometry of the disk taking a to 0
    return (z - a) / (1.0 - a.conjugate() * z)


def _mobius_inv(z: complex, a: complex) -> complex:
    return (z + a) / (1.0 + a.conjugate() * z)


def geodesic_point(p: DiskPoint, q: DiskPoint, s: float) -> DiskPoint:
    """Point on the geodesic segment from ``p`` to ``q`` at distance ``s`` from ``p``."""
    total = dist(p, q)
    if s < -1e-12 or s > total + 1e-12:
        raise ValueError(f"s={s} outside [0, {total}]")
    s = min(max(s, 0.0), total)
    if s == 0.0:
        return p
    if s == total:
        return q
    a = complex(p.u, p.v)
    image = _mobius(complex(q.u, q.v), a)
    direction = image / abs(image)
    r = _mobius_inv(math.tanh(s / 2.0) * direction, a)
    return DiskPoint(r.real, r.imag)


def translate_polar(center_rho, center_phi, radius, bearing):
    """Move ``radius`` away from a centre point along ``bearing``.

    ``bearing`` is measured from the outward radial direction at the centre.
    Vectorized; returns ``(rho, phi)`` arrays with ``phi`` unnormalized.
    """
    radius = np.asarray(radius, dtype=float)
    bearing = np.asarray(bearing, dtype=float)
    # hyperboloid coordinates of the offset point around the origin
    x0 = np.cosh(radius)
    x1 = np.sinh(radius) * np.cos(bearing)
    x2 = np.sinh(radius) * np.sin(bearing)
    ch, sh = math.cosh(center_rho), math.sinh(center_rho)
    y1 = sh * x0 + ch * x1
    rho = np.arcsinh(np.hypot(y1, x2))
    phi = np.arctan2(x2, y1) + center_phi
    return rho, phi
