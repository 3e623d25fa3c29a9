"""Four-point hyperbolicity estimates for the comb's path metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .comb import CombSpec, sample_points
from .hyperbolic import polar_dist
from .pathmetric import PathMetric, metric_for

HISTOGRAM_WIDTH = 0.05


def four_point_defect(x: Any, y: Any, z: Any, w: Any, metric: Callable[[Any, Any], float]) -> float:
    """Smallest ``delta`` with ``(a|c)_w >= min((a|b)_w, (b|c)_w) - delta`` for
    every labelling of ``x, y, z`` with basepoint ``w``."""
    dxw, dyw, dzw = metric(x, w), metric(y, w), metric(z, w)
    xy = (dxw + dyw - metric(x, y)) / 2.0
    yz = (dyw + dzw - metric(y, z)) / 2.0
    xz = (dxw + dzw - metric(x, z)) / 2.0
    return defect_from_products(xy, yz, xz)


def defect_from_products(xy, yz, xz):
    """Vectorized defect from the three Gromov products at a common basepoint."""
    xy, yz, xz = (np.asarray(v, dtype=float) for v in (xy, yz, xz))
    worst = np.maximum.reduce([
        np.minimum(xy, yz) - xz,
        np.minimum(xy, xz) - yz,
        np.minimum(yz, xz) - xy,
    ])
    out = np.maximum(worst, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DeltaEstimate:
    delta_max: float
    sample_count: int
    radius_cap: float
    seed: int
    epsilon: float | None
    histogram: list = field(default_factory=list)
    worst_quadruple: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "delta_max": self.delta_max,
            "sample_count": self.sample_count,
            "radius_cap": self.radius_cap,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "histogram": [[b, c] for b, c in self.histogram],
            "worst_quadruple": self.worst_quadruple,
        }


def _histogram(values: np.ndarray) -> list:
    buckets = np.floor(values / HISTOGRAM_WIDTH).astype(np.int64)
    idx, counts = np.unique(buckets, return_counts=True)
    return [(round(float(i) * HISTOGRAM_WIDTH, 10), int(c)) for i, c in zip(idx, counts)]


def _products(d: dict) -> tuple:
    xy = (d["xw"] + d["yw"] - d["xy"]) / 2.0
    yz = (d["yw"] + d["zw"] - d["yz"]) / 2.0
    xz = (d["xw"] + d["zw"] - d["xz"]) / 2.0
    return xy, yz, xz


def estimate_delta(
    spec: CombSpec,
    sample_count: int = 10_000,
    radius_cap: float = 20.0,
    epsilon: float = 0.1,
    seed: int = 0,
    metric: PathMetric | None = None,
    batch_size: int = 4096,
) -> DeltaEstimate:
    """Maximum four-point defect of ``d_X`` over random quadruples.

    Points come from :func:`combspace.comb.sample_points` below
    ``radius_cap``; the basepoint is the fourth sampled point.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if metric is None:
        metric = metric_for(spec, epsilon)
    rng = np.random.default_rng(seed)
    defects = np.empty(sample_count)
    best = (-1.0, None)
    for start in range(0, sample_count, batch_size):
        size = min(batch_size, sample_count - start)
        pts = sample_points(spec, rng, 4 * size, radius_cap)
        prep = metric.prepare(pts)
        vec = metric.portal_vectors(prep)
        x, y, z, w = (np.arange(size) * 4 + k for k in range(4))
        pairs = {"xy": (x, y), "xz": (x, z), "xw": (x, w), "yz": (y, z), "yw": (y, w), "zw": (z, w)}
        d = {k: metric.paired_prepared(prep, vec, prep, vec, a, b) for k, (a, b) in pairs.items()}
        chunk = defect_from_products(*_products(d))
        defects[start:start + size] = chunk
        i = int(np.argmax(chunk))
        if chunk[i] > best[0]:
            best = (float(chunk[i]), [pts.point(int(j)) for j in (x[i], y[i], z[i], w[i])])
    return DeltaEstimate(
        delta_max=float(defects.max()),
        sample_count=sample_count,
        radius_cap=float(radius_cap),
        seed=seed,
        epsilon=float(metric.epsilon),
        histogram=_histogram(defects),
        worst_quadruple=[_point_dict(p) for p in best[1]],
    )


def _point_dict(p) -> dict:
    from .comb import InSector

    if isinstance(p, InSector):
        return {"sector": p.sector, "rho": p.rho, "phi": p.phi}
    return {"spoke": p.spoke, "t": p.t}


def sample_plane_ball(rng: np.random.Generator, size: int, radius: float):
    """Points uniform in hyperbolic area inside ``B(origin, radius)``."""
    u = rng.random(size)
    rho = np.arccosh(1.0 + u * (math.cosh(radius) - 1.0))
    phi = rng.random(size) * 2.0 * math.pi
    return rho, phi


def estimate_plane_delta(sample_count: int = 10_000, radius: float = 10.0, seed: int = 0) -> DeltaEstimate:
    """Control run: four-point defect of the plane itself inside a ball."""
    rng = np.random.default_rng(seed)
    rho, phi = sample_plane_ball(rng, 4 * sample_count, radius)
    rho = rho.reshape(sample_count, 4)
    phi = phi.reshape(sample_count, 4)

    def pd(i, j):
        return polar_dist(rho[:, i], phi[:, i], rho[:, j], phi[:, j])

    d = {"xy": pd(0, 1), "xz": pd(0, 2), "xw": pd(0, 3), "yz": pd(1, 2), "yw": pd(1, 3), "zw": pd(2, 3)}
    defects = defect_from_products(*_products(d))
    i = int(np.argmax(defects))
    worst = [{"rho": float(rho[i, k]), "phi": float(phi[i, k])} for k in range(4)]
    return DeltaEstimate(
        delta_max=float(defects.max()),
        sample_count=sample_count,
        radius_cap=float(radius),
        seed=seed,
        epsilon=None,
        histogram=_histogram(defects),
        worst_quadruple=worst,
    )


def histogram_csv(est: DeltaEstimate) -> str:
    lines = ["bucket_lo,bucket_hi,count"]
    for lo, count in est.histogram:
        lines.append(f"{lo!r},{round(lo + HISTOGRAM_WIDTH, 10)!r},{count}")
    return "\n".join(lines) + "\n"
