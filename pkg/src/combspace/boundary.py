"""Boundary at infinity of the comb.

Every spoke contributes one boundary point and nothing else escapes to
infinity.  A path between far points of two hairs has to leave each hair
through its attachment ``v`` at radius ``A``, so the Gromov product at the
origin of the two boundary points is exactly ``(A_a + A_b - d_X(v_a, v_b)) / 2``
and needs no limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comb import CombSpec, OnSpoke, spoke_batch
from .pathmetric import PathMetric

INFINITE = math.inf


class CoverCertificateError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class BoundaryPoint:
    spoke: int


def boundary_points(spec: CombSpec, count: int | None = None) -> list[BoundaryPoint]:
    total = len(spec.spokes)
    count = total if count is None else min(count, total)
    return [BoundaryPoint(i) for i in range(count)]


@dataclass(frozen=True)
class VisualMetricParams:
    a: float = math.e
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 1.0:
            raise ValueError("visual parameter a must exceed 1")
        if not (0.0 < self.c1 <= self.c2):
            raise ValueError("need 0 < c1 <= c2")


def product_at_infinity(metric: PathMetric, xi: BoundaryPoint, zeta: BoundaryPoint) -> float:
    if xi.spoke == zeta.spoke:
        return INFINITE
    return float(product_matrix(metric, [xi.spoke, zeta.spoke])[0, 1])


def product_matrix(metric: PathMetric, spokes) -> np.ndarray:
    """Gromov products at the origin between the boundary points of ``spokes``."""
    spokes = np.asarray(spokes, dtype=np.int64)
    attach = metric.spec.spokes.attach_radius[spokes]
    feet = spoke_batch(metric.spec, spokes, attach)
    d = metric.pairwise(feet)
    prod = (attach[:, None] + attach[None, :] - d) / 2.0
    prod = np.maximum(prod, 0.0)
    np.fill_diagonal(prod, INFINITE)
    return prod


def finite_product(metric: PathMetric, a: int, b: int, ta: float, tb: float) -> float:
    """``(p|q)_{x0}`` for the hair points at radius ``ta`` on ``a`` and ``tb`` on ``b``."""
    from .comb import InSector

    origin = InSector(1, 0.0, 0.0)
    p, q = OnSpoke(int(a), float(ta)), OnSpoke(int(b), float(tb))
    return (metric.dist(p, origin) + metric.dist(q, origin) - metric.dist(p, q)) / 2.0


def visual_distance(params: VisualMetricParams, product):
    """``a ** -product``; the infinite product of a point with itself maps to 0."""
    product = np.asarray(product, dtype=float)
    out = np.where(np.isinf(product), 0.0, np.power(params.a, -np.where(np.isinf(product), 0.0, product)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundaryCover:
    clusters: list
    mesh: float
    min_gap: float
    thresholds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "clusters": [list(c) for c in self.clusters],
            "mesh": self.mesh,
            "min_gap": self.min_gap,
            "thresholds": self.thresholds,
        }


def _components(dist: np.ndarray, members: np.ndarray, threshold: float) -> list[np.ndarray]:
    """Single-linkage clusters: components of the graph ``dist < threshold``."""
    sub = dist[np.ix_(members, members)] < threshold
    label = np.full(len(members), -1)
    out = []
    for s in range(len(members)):
        if label[s] >= 0:
            continue
        label[s] = len(out)
        stack = [s]
        comp = [s]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(sub[u] & (label < 0)):
                label[v] = label[s]
                stack.append(int(v))
                comp.append(int(v))
        out.append(members[np.sort(comp)])
    return out


def zero_dim_cover(
    metric: PathMetric,
    points,
    eps_mesh: float,
    params: VisualMetricParams = VisualMetricParams(),
) -> BoundaryCover:
    """Partition boundary points into clusters of visual diameter below ``eps_mesh``.

    Starts from single-linkage clusters at threshold ``eps_mesh / 2``; a
    cluster that is still too wide is split again at half its threshold
    until it fits, so every cluster is separated from the rest of its parent
    by at least the threshold at which it was cut.  Visual distances carry a
    relative uncertainty ``exp(2 epsilon)`` from the portal spacing; the mesh
    must clear ``eps_mesh`` after inflating by it.
    """
    if eps_mesh <= 0.0:
        raise ValueError("eps_mesh must be positive")
    spokes = np.array([p.spoke if isinstance(p, BoundaryPoint) else int(p) for p in points])
    if len(np.unique(spokes)) != len(spokes):
        raise ValueError("boundary points must be distinct")
    vis = visual_distance(params, product_matrix(metric, spokes))
    slack = math.exp(2.0 * metric.epsilon)
    thresholds = []
    pending = [(np.arange(len(spokes)), eps_mesh / 2.0)]
    final = []
    while pending:
        members, threshold = pending.pop()
        for comp in _components(vis, members, threshold):
            if len(comp) == 1 or vis[np.ix_(comp, comp)].max() * slack < eps_mesh:
                final.append((comp, threshold))
            else:
                pending.append((comp, threshold / 2.0))
        thresholds.append(threshold)
    final.sort(key=lambda item: int(item[0][0]))
    clusters = [c for c, _ in final]
    mesh = max(float(vis[np.ix_(c, c)].max()) for c in clusters)
    label = np.empty(len(spokes), dtype=np.int64)
    for i, c in enumerate(clusters):
        label[c] = i
    across = label[:, None] != label[None, :]
    min_gap = float(vis[across].min()) if across.any() else INFINITE
    if not (min_gap / slack > 0.0):
        raise CoverCertificateError(
            "clusters are not separated by a positive visual gap; shrink epsilon"
        )
    return BoundaryCover(
        clusters=[[int(spokes[i]) for i in c] for c in clusters],
        mesh=mesh,
        min_gap=min_gap,
        thresholds=sorted(set(thresholds), reverse=True),
    )


def visual_distance_csv(spokes, vis: np.ndarray) -> str:
    head = "spoke," + ",".join(str(int(s)) for s in spokes)
    rows = [head]
    for s, row in zip(spokes, vis):
        rows.append(str(int(s)) + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(rows) + "\n"
