"""Intrinsic path metric of the comb.

Each truncated sector is convex in the hyperbolic plane, so inside one sector
the path metric is the plane distance, and a hair is an isometric copy of an
interval hanging off its attachment point.  Shortest paths between different
sectors can only bend where sectors are glued: along the shared segments
``[0, N_n]`` of the rays ``a_{n+1}``.  Those segments are sampled by portal
nodes every ``epsilon``; portals of one sector are joined pairwise by their
exact plane distance, and all-pairs shortest paths between portals are
precomputed once.  A query point is attached to the portals of the sectors
containing it (a hair point to those of its attachment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comb import (
    ANGLE_TOL,
    RADIUS_TOL,
    CombSpec,
    InSector,
    LocatedPoint,
    OnSpoke,
    PointBatch,
    batch_from_points,
    contains,
    position,
    sample_points,
    sectors_containing,
)
from .hyperbolic import polar_dist

# bound on floats held by one broadcast block in the min-plus products
_BLOCK = 4_000_000


class DisconnectedGraphError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PortalGraph:
    """Portal nodes on the gluing segments with all-pairs shortest paths.

    Node 0 is the origin.  ``ray`` gives the index ``k`` of the ray ``a_k``
    each node lies on (0 for the origin).  ``sector_portals[n - 1]`` lists the
    nodes lying in sector ``n``.
    """

    epsilon: float
    spec_digest: str
    rho: np.ndarray
    phi: np.ndarray
    ray: np.ndarray
    sector_portals: tuple[np.ndarray, ...]
    dist: np.ndarray
    next_hop: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.rho)

    def edges(self):
        """Yield ``(i, j, weight)`` for every intra-sector portal pair, ``i < j``."""
        seen = set()
        for portals in self.sector_portals:
            d = polar_dist(
                self.rho[portals][:, None], self.phi[portals][:, None],
                self.rho[portals][None, :], self.phi[portals][None, :],
            )
            for a in range(len(portals)):
                for b in range(a + 1, len(portals)):
                    i, j = sorted((int(portals[a]), int(portals[b])))
                    if (i, j) not in seen:
                        seen.add((i, j))
                        yield i, j, float(d[a, b])

    def path(self, i: int, j: int) -> list[int]:
        out = [int(i)]
        while out[-1] != j:
            nxt = int(self.next_hop[out[-1], j])
            if nxt < 0:
                raise DisconnectedGraphError(f"no path between portal {i} and {j}")
            out.append(nxt)
        return out


def _ray_positions(length: float, epsilon: float) -> np.ndarray:
    # multiples of epsilon keep node sets nested when epsilon is halved
    count = int(math.floor(length / epsilon))
    pos = epsilon * np.arange(1, count + 1, dtype=float)
    pos = pos[pos < length]
    return np.append(pos, length)


def build_portal_graph(spec: CombSpec, epsilon: float) -> PortalGraph:
    if not (0.0 < epsilon <= 1.0):
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    rho = [np.zeros(1)]
    phi = [np.zeros(1)]
    ray = [np.zeros(1, dtype=np.int64)]
    on_ray: dict[int, np.ndarray] = {}
    start = 1
    for n in range(1, spec.n_sectors):
        sec = spec.sector(n)
        pos = _ray_positions(sec.truncation_radius, epsilon)
        on_ray[n + 1] = np.arange(start, start + len(pos))
        start += len(pos)
        rho.append(pos)
        phi.append(np.full(len(pos), spec.sector(n + 1).theta_lo))
        ray.append(np.full(len(pos), n + 1, dtype=np.int64))
    rho = np.concatenate(rho)
    phi = np.concatenate(phi)
    ray = np.concatenate(ray)

    portals = []
    for n in range(1, spec.n_sectors + 1):
        parts = [np.zeros(1, dtype=np.int64)]
        if n in on_ray:
            parts.append(on_ray[n])
        if n + 1 in on_ray:
            parts.append(on_ray[n + 1])
        portals.append(np.concatenate(parts))

    size = len(rho)
    weight = np.full((size, size), np.inf)
    np.fill_diagonal(weight, 0.0)
    for p in portals:
        d = polar_dist(rho[p][:, None], phi[p][:, None], rho[p][None, :], phi[p][None, :])
        block = weight[np.ix_(p, p)]
        weight[np.ix_(p, p)] = np.minimum(block, d)
    dist, next_hop = _floyd_warshall(weight)
    if not np.all(np.isfinite(dist)):
        raise DisconnectedGraphError("portal graph is disconnected")
    return PortalGraph(
        epsilon=float(epsilon),
        spec_digest=spec.digest,
        rho=rho,
        phi=phi,
        ray=ray,
        sector_portals=tuple(portals),
        dist=dist,
        next_hop=next_hop,
    )


def _floyd_warshall(weight: np.ndarray):
    """All-pairs shortest paths; strict improvements only, so ties keep the
    earliest route found (lowest intermediate node id)."""
    dist = weight.copy()
    size = len(dist)
    next_hop = np.where(np.isfinite(dist), np.arange(size)[None, :], -1)
    for k in range(size):
        cand = dist[:, k, None] + dist[None, k, :]
        better = cand < dist
        if better.any():
            dist = np.where(better, cand, dist)
            next_hop = np.where(better, next_hop[:, k, None], next_hop)
    return dist, next_hop


@dataclass(frozen=True)
class PathWitness:
    polyline: list
    length: float


@dataclass(eq=False)
class _Prepared:
    """Query points reduced to a base point in the 2-d part plus a hair offset."""

    base_rho: np.ndarray
    base_phi: np.ndarray
    offset: np.ndarray
    spoke: np.ndarray
    member: np.ndarray  # (n, sectors) bool
    local: dict = field(default_factory=dict)  # sector -> (rows, dist to portals)


class PathMetric:
    """The path metric ``d_X`` of a comb at portal spacing ``epsilon``."""

    def __init__(self, spec: CombSpec, epsilon: float = 0.1, graph: PortalGraph | None = None):
        self.spec = spec
        self.epsilon = float(epsilon)
        self.graph = graph if graph is not None else build_portal_graph(spec, epsilon)
        self._starts = spec.starts
        self._ends = spec.ends
        self._trunc = spec.truncations

    # -- preparation -------------------------------------------------------

    def prepare(self, batch: PointBatch) -> _Prepared:
        sp = self.spec.spokes
        hair = batch.spoke >= 0
        base_rho = np.where(hair, sp.attach_radius[np.where(hair, batch.spoke, 0)], batch.rho)
        base_rho = np.maximum(base_rho, 0.0)
        offset = np.where(hair, batch.rho - base_rho, 0.0)
        offset = np.maximum(offset, 0.0)
        phi = batch.phi
        member = (
            (phi[:, None] >= self._starts[None, :] - ANGLE_TOL)
            & (phi[:, None] <= self._ends[None, :] + ANGLE_TOL)
            & (base_rho[:, None] <= self._trunc[None, :] + RADIUS_TOL)
        )
        member |= (base_rho <= RADIUS_TOL)[:, None]
        if not member.any(axis=1).all():
            bad = int(np.flatnonzero(~member.any(axis=1))[0])
            raise ValueError(f"point {batch.point(bad)!r} lies outside the comb")
        prep = _Prepared(base_rho, phi.copy(), offset, batch.spoke.copy(), member)
        portals = self.graph.sector_portals
        g = self.graph
        for k in range(self.spec.n_sectors):
            rows = np.flatnonzero(member[:, k])
            if len(rows):
                p = portals[k]
                d = polar_dist(
                    base_rho[rows][:, None], phi[rows][:, None],
                    g.rho[p][None, :], g.phi[p][None, :],
                )
                prep.local[k] = (rows, d)
        return prep

    def portal_vectors(self, prep: _Prepared) -> np.ndarray:
        """``d_X`` from every prepared point to every portal node."""
        g = self.graph
        n = len(prep.base_rho)
        out = np.full((n, g.n_nodes), np.inf)
        for k, (rows, local) in prep.local.items():
            block = g.dist[g.sector_portals[k]]
            width = block.shape[0] * block.shape[1]
            step = max(1, _BLOCK // width)
            for s in range(0, len(rows), step):
                r = rows[s:s + step]
                vals = (local[s:s + step, :, None] + block[None, :, :]).min(axis=1)
                out[r] = np.minimum(out[r], vals)
        out += prep.offset[:, None]
        return out

    # -- distances ---------------------------------------------------------

    def _directed_matrix(self, vec_a: np.ndarray, prep_b: _Prepared) -> np.ndarray:
        g = self.graph
        out = np.full((len(vec_a), len(prep_b.base_rho)), np.inf)
        for k, (rows, local) in prep_b.local.items():
            cols = vec_a[:, g.sector_portals[k]]
            width = len(rows) * cols.shape[1]
            step = max(1, _BLOCK // max(width, 1))
            for s in range(0, len(vec_a), step):
                vals = (cols[s:s + step, None, :] + local[None, :, :]).min(axis=2)
                sub = out[s:s + step]
                sub[:, rows] = np.minimum(sub[:, rows], vals)
        return out + prep_b.offset[None, :]

    def _exact_matrix(self, a: _Prepared, b: _Prepared):
        same_piece = (a.member.astype(np.int32) @ b.member.T.astype(np.int32)) > 0
        plane = polar_dist(
            a.base_rho[:, None], a.base_phi[:, None], b.base_rho[None, :], b.base_phi[None, :]
        )
        exact = plane + (a.offset[:, None] + b.offset[None, :])
        same_hair = (a.spoke[:, None] == b.spoke[None, :]) & (a.spoke[:, None] >= 0)
        hair_gap = np.abs((a.base_rho + a.offset)[:, None] - (b.base_rho + b.offset)[None, :])
        exact = np.where(same_hair, hair_gap, exact)
        return same_piece | same_hair, exact

    def pairwise(self, a: PointBatch, b: PointBatch | None = None) -> np.ndarray:
        """Matrix of ``d_X`` between two batches (symmetric when ``b`` is omitted)."""
        pa = self.prepare(a)
        va = self.portal_vectors(pa)
        if b is None:
            pb, vb = pa, va
        else:
            pb = self.prepare(b)
            vb = self.portal_vectors(pb)
        forward = self._directed_matrix(va, pb)
        backward = self._directed_matrix(vb, pa)
        out = np.minimum(forward, backward.T)
        exact_mask, exact = self._exact_matrix(pa, pb)
        out = np.where(exact_mask, exact, out)
        if b is None:
            np.fill_diagonal(out, 0.0)
        return out

    def _directed_paired(self, vec_a: np.ndarray, prep_b: _Prepared) -> np.ndarray:
        g = self.graph
        out = np.full(len(vec_a), np.inf)
        for k, (rows, local) in prep_b.local.items():
            vals = (vec_a[rows][:, g.sector_portals[k]] + local).min(axis=1)
            out[rows] = np.minimum(out[rows], vals)
        return out + prep_b.offset

    def paired_prepared(self, pa, va, pb, vb, ia=None, ib=None) -> np.ndarray:
        """Elementwise distances between rows ``ia`` of ``pa`` and ``ib`` of ``pb``."""
        if ia is not None:
            pa, va = _subset(pa, ia), va[ia]
        if ib is not None:
            pb, vb = _subset(pb, ib), vb[ib]
        out = np.minimum(self._directed_paired(va, pb), self._directed_paired(vb, pa))
        same_piece = (pa.member & pb.member).any(axis=1)
        plane = polar_dist(pa.base_rho, pa.base_phi, pb.base_rho, pb.base_phi)
        exact = plane + (pa.offset + pb.offset)
        out = np.where(same_piece, exact, out)
        same_hair = (pa.spoke == pb.spoke) & (pa.spoke >= 0)
        gap = np.abs((pa.base_rho + pa.offset) - (pb.base_rho + pb.offset))
        return np.where(same_hair, gap, out)

    def paired(self, a: PointBatch, b: PointBatch) -> np.ndarray:
        """Elementwise ``d_X(a[i], b[i])``."""
        if len(a) != len(b):
            raise ValueError("paired batches must have equal length")
        pa = self.prepare(a)
        pb = self.prepare(b)
        return self.paired_prepared(pa, self.portal_vectors(pa), pb, self.portal_vectors(pb))

    def dist(self, p: LocatedPoint, q: LocatedPoint) -> float:
        batch = batch_from_points(self.spec, [p, q])
        return float(self.paired(batch.take([0]), batch.take([1]))[0])

    __call__ = dist

    # -- witnesses ---------------------------------------------------------

    def dist_with_witness(self, p: LocatedPoint, q: LocatedPoint) -> tuple[float, PathWitness]:
        value = self.dist(p, q)
        exact = same_piece_dist(self.spec, p, q)
        if exact is not None:
            poly = [p] + _hair_foot(self.spec, p, q) + [q]
            return value, PathWitness(_dedupe(poly), witness_length(self.spec, _dedupe(poly)))
        batch = batch_from_points(self.spec, [p, q])
        prep = self.prepare(batch)
        best = None
        for src, dst in ((0, 1), (1, 0)):
            route = self._route(prep, src, dst)
            if best is None or route[0] < best[0]:
                best = route
        _, u, w, order = best
        nodes = self.graph.path(u, w)
        ends = [p, q] if order == (0, 1) else [q, p]
        poly = [ends[0]] + _foot(self.spec, ends[0])
        poly += [self.node_point(i) for i in nodes]
        poly += _foot(self.spec, ends[1])[::-1] + [ends[1]]
        if order != (0, 1):
            poly = poly[::-1]
        poly = _dedupe(poly)
        return value, PathWitness(poly, witness_length(self.spec, poly))

    def _route(self, prep: _Prepared, src: int, dst: int):
        g = self.graph
        best = (math.inf, -1, -1, (src, dst))
        for ks, (rows_s, local_s) in prep.local.items():
            if src not in rows_s:
                continue
            ls = local_s[list(rows_s).index(src)]
            us = g.sector_portals[ks]
            for kd, (rows_d, local_d) in prep.local.items():
                if dst not in rows_d:
                    continue
                ld = local_d[list(rows_d).index(dst)]
                wd = g.sector_portals[kd]
                total = (ls[:, None] + g.dist[np.ix_(us, wd)]) + ld[None, :]
                i, j = np.unravel_index(int(np.argmin(total)), total.shape)
                val = float(total[i, j]) + prep.offset[src] + prep.offset[dst]
                if val < best[0]:
                    best = (val, int(us[i]), int(wd[j]), (src, dst))
        return best

    def node_point(self, i: int) -> InSector:
        rho = float(self.graph.rho[i])
        phi = float(self.graph.phi[i])
        owners = sectors_containing(self.spec, rho, phi)
        return InSector(owners[0], rho, phi)


def _subset(prep: _Prepared, idx) -> _Prepared:
    idx = np.asarray(idx)
    sub = _Prepared(
        prep.base_rho[idx], prep.base_phi[idx], prep.offset[idx], prep.spoke[idx], prep.member[idx]
    )
    # local tables are rebuilt lazily per sector
    lookup = {}
    for k, (rows, local) in prep.local.items():
        pos = np.full(len(prep.base_rho), -1, dtype=np.int64)
        pos[rows] = np.arange(len(rows))
        sel = pos[idx]
        keep = np.flatnonzero(sel >= 0)
        if len(keep):
            lookup[k] = (keep, local[sel[keep]])
    sub.local = lookup
    return sub


def _foot(spec: CombSpec, p: LocatedPoint) -> list:
    """Attachment point of a hair point (empty for sector points)."""
    if isinstance(p, OnSpoke):
        attach = float(spec.spokes.attach_radius[p.spoke])
        if p.t > attach:
            return [OnSpoke(p.spoke, attach)]
    return []


def _hair_foot(spec: CombSpec, p: LocatedPoint, q: LocatedPoint) -> list:
    if isinstance(p, OnSpoke) and isinstance(q, OnSpoke) and p.spoke == q.spoke:
        return []
    return _foot(spec, p) + _foot(spec, q)[::-1]


def _dedupe(poly: list) -> list:
    out = []
    for pt in poly:
        if not out or out[-1] != pt:
            out.append(pt)
    return out


def witness_length(spec: CombSpec, poly: list) -> float:
    """Sum of exact piece-wise distances along a polyline of located points."""
    total = 0.0
    for a, b in zip(poly, poly[1:]):
        step = same_piece_dist(spec, a, b)
        if step is None:
            raise ValueError(f"consecutive witness points {a!r}, {b!r} share no piece")
        total += step
    return total


def _pieces(spec: CombSpec, p: LocatedPoint) -> tuple[set, int | None, float]:
    """Sectors touching the base point, hair id and hair offset."""
    if isinstance(p, OnSpoke):
        attach = float(spec.spokes.attach_radius[p.spoke])
        base = position(spec, OnSpoke(p.spoke, attach))
        return set(sectors_containing(spec, base.rho, base.phi)), p.spoke, max(p.t - attach, 0.0)
    pos = position(spec, p)
    return set(sectors_containing(spec, pos.rho, pos.phi)), None, 0.0


def same_piece_dist(spec: CombSpec, p: LocatedPoint, q: LocatedPoint) -> float | None:
    """Exact ``d_X`` when ``p`` and ``q`` share a convex sector or a hair, else None.

    A hair point counts as sharing the sector of its attachment, the hair being
    walked down exactly.
    """
    if not (contains(spec, p) and contains(spec, q)):
        raise ValueError("both points must lie in the comb")
    if isinstance(p, OnSpoke) and isinstance(q, OnSpoke) and p.spoke == q.spoke:
        return abs(p.t - q.t)
    sp, _, op = _pieces(spec, p)
    sq, _, oq = _pieces(spec, q)
    if not sp & sq:
        return None
    a = position(spec, p if not isinstance(p, OnSpoke) else OnSpoke(p.spoke, p.t - op))
    b = position(spec, q if not isinstance(q, OnSpoke) else OnSpoke(q.spoke, q.t - oq))
    return float(polar_dist(a.rho, a.phi, b.rho, b.phi)) + (op + oq)


_CACHE: dict = {}


def metric_for(spec: CombSpec, epsilon: float) -> PathMetric:
    """Shared :class:`PathMetric` per (spec, epsilon); graphs are immutable."""
    key = (spec.digest, float(epsilon))
    metric = _CACHE.get(key)
    if metric is None:
        if len(_CACHE) > 16:
            _CACHE.clear()
        metric = PathMetric(spec, epsilon)
        _CACHE[key] = metric
    return metric


def dist_X(spec: CombSpec, p: LocatedPoint, q: LocatedPoint, epsilon: float = 0.1):
    """``(value, witness)`` for the path distance between two comb points."""
    return metric_for(spec, epsilon).dist_with_witness(p, q)


@dataclass(frozen=True)
class QIConstants:
    multiplicative: float
    additive: float
    sample_count: int
    seed: int
    max_ratio: float


def qi_constants(
    metric: PathMetric, sample_count: int = 1000, seed: int = 0, radius_cap: float | None = None
) -> QIConstants:
    """Fit ``d_X <= lam * d_plane + c`` over random pairs.

    ``d_plane <= d_X`` always holds, so only the upper constants are fitted: the
    linear program minimizes ``lam * mean(d_plane) + c`` subject to every
    sampled pair, ``lam >= 1`` and ``c >= 0``.
    """
    from scipy.optimize import linprog

    if sample_count < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    a = sample_points(metric.spec, rng, sample_count, radius_cap)
    b = sample_points(metric.spec, rng, sample_count, radius_cap)
    dx = metric.paired(a, b)
    pa = metric.prepare(a)
    pb = metric.prepare(b)
    plane = polar_dist(
        np.where(a.spoke >= 0, a.rho, pa.base_rho), a.phi,
        np.where(b.spoke >= 0, b.rho, pb.base_rho), b.phi,
    )
    res = linprog(
        c=[float(plane.mean()), 1.0],
        A_ub=np.column_stack([-plane, -np.ones_like(plane)]),
        b_ub=-dx,
        bounds=[(1.0, None), (0.0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    lam, c = (float(x) for x in res.x)
    # snap the solver's last-digit noise so reports are stable
    lam, c = round(lam, 12), round(c, 12)
    positive = plane > 1e-9
    ratio = float(np.max(dx[positive] / plane[positive])) if positive.any() else 1.0
    return QIConstants(lam, c, sample_count, seed, ratio)
