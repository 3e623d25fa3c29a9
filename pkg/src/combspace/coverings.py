"""Finite-scale asymptotic dimension certificates.

Two kinds of evidence are produced:

* upper: :func:`build_cover` lays a brick pattern over the whole comb and
  probes it to certify that every ``d``-ball meets at most three blocks;
* lower: :func:`decomposition_search` decides, by exhaustive backtracking,
  whether a finite net splits into two ``d``-disconnected families of
  ``D``-bounded blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .comb import (
    CombSpec,
    InSector,
    LocatedPoint,
    OnSpoke,
    PointBatch,
    batch_from_points,
    sector_batch,
    spoke_batch,
)
from .hyperbolic import polar_dist, translate_polar
from .pathmetric import PathMetric

# --------------------------------------------------------------------------
# regions and nets


@dataclass(frozen=True)
class OriginBall:
    """``B(x0, radius)`` intersected with the comb."""

    radius: float


@dataclass(frozen=True)
class SectorBall:
    """Plane ball around the inscribed-ball centre of ``sector``."""

    sector: int
    radius: float


@dataclass(frozen=True)
class SinglePoint:
    point: LocatedPoint


Region = Union[OriginBall, SectorBall, SinglePoint]


def _radii(top: float, h: float) -> np.ndarray:
    r = h * np.arange(int(math.floor(top / h)) + 1, dtype=float)
    r = r[r < top - 1e-12]
    return np.append(r, top)


def sector_grid(spec: CombSpec, h: float, radius: float | None = None) -> PointBatch:
    """Polar grid over all sectors with neighbouring points at most ``h`` apart."""
    batches = []
    for sec in spec.sectors:
        top = sec.truncation_radius if radius is None else min(radius, sec.truncation_radius)
        prev_top = spec.sector(sec.index - 1).truncation_radius if sec.index > 1 else -1.0
        if radius is not None:
            prev_top = min(prev_top, radius)
        rhos, phis = [], []
        for r in _radii(top, h):
            if r == 0.0:
                if sec.index == 1:
                    rhos.append(0.0)
                    phis.append(0.0)
                continue
            count = max(1, math.ceil(sec.alpha * math.sinh(r) / h))
            ang = sec.theta_lo + np.arange(count + 1) * (sec.alpha / count)
            ang[-1] = sec.theta_hi
            if sec.index > 1 and r <= prev_top + 1e-12 and np.any(np.isclose(_radii(prev_top, h), r)):
                ang = ang[1:]  # already on the previous sector's grid
            rhos.extend([r] * len(ang))
            phis.extend(ang)
        batches.append(sector_batch(sec.index, rhos, phis))
    return PointBatch.concat(batches)


def hair_grid(spec: CombSpec, h: float, radius: float | None = None, spokes=None) -> PointBatch:
    """Points every ``h`` along each hair strictly above its attachment."""
    top = spec.r_max if radius is None else min(radius, spec.r_max)
    ids = np.arange(len(spec.spokes)) if spokes is None else np.asarray(spokes)
    attach = spec.spokes.attach_radius[ids]
    keep = attach < top - 1e-12
    ids, attach = ids[keep], attach[keep]
    if not len(ids):
        return spoke_batch(spec, np.zeros(0, dtype=np.int64), np.zeros(0))
    steps = np.ceil((top - attach) / h).astype(np.int64)
    sid = np.repeat(ids, steps)
    k = np.arange(steps.sum()) - np.repeat(np.cumsum(steps) - steps, steps) + 1
    t = np.minimum(np.repeat(attach, steps) + k * h, top)
    return spoke_batch(spec, sid, t)


def comb_grid(spec: CombSpec, h: float, radius: float | None = None) -> PointBatch:
    return PointBatch.concat([sector_grid(spec, h, radius), hair_grid(spec, h, radius)])


def region_grid(spec: CombSpec, region: Region, h: float) -> PointBatch:
    if isinstance(region, SinglePoint):
        return batch_from_points(spec, [region.point])
    if isinstance(region, OriginBall):
        if region.radius < 0:
            raise ValueError("empty region")
        return comb_grid(spec, h, region.radius)
    if isinstance(region, SectorBall):
        sec = spec.sector(region.sector)
        rhos, phis = [0.0], [0.0]
        for s in _radii(region.radius, h)[1:]:
            count = max(3, math.ceil(2.0 * math.pi * math.sinh(s) / h))
            bearing = np.arange(count) * (2.0 * math.pi / count)
            rhos.extend([s] * count)
            phis.extend(bearing)
        rho, phi = translate_polar(sec.center.rho, sec.center.phi, np.array(rhos), np.array(phis))
        inside = (phi >= sec.theta_lo) & (phi <= sec.theta_hi) & (rho <= sec.truncation_radius)
        if not inside.all():
            raise ValueError(f"ball of radius {region.radius} leaves sector {sec.index}")
        return sector_batch(sec.index, rho, phi)
    raise TypeError(f"unknown region {region!r}")


@dataclass(frozen=True, eq=False)
class Net:
    points: PointBatch
    scale: float
    dist: np.ndarray
    covering_radius: float
    probe_spacing: float
    probe_count: int

    def __len__(self) -> int:
        return len(self.points)

    @property
    def min_separation(self) -> float:
        if len(self) < 2:
            return math.inf
        off = self.dist[~np.eye(len(self), dtype=bool)]
        return float(off.min())


def build_net(metric: PathMetric, region: Region, s: float) -> Net:
    """Greedy farthest-point ``s``-net of a region under ``d_X``.

    Candidates are a probe grid at spacing ``s/2``; the net is grown from the
    first probe by repeatedly adding the probe farthest from the current net
    until every probe is within ``s``.
    """
    if s <= 0:
        raise ValueError("net scale must be positive")
    probes = region_grid(metric.spec, region, s / 2.0)
    if not len(probes):
        raise ValueError("empty region")
    d = metric.pairwise(probes)
    chosen = [0]
    nearest = d[0].copy()
    while True:
        i = int(np.argmax(nearest))
        if nearest[i] < s:
            break
        chosen.append(i)
        nearest = np.minimum(nearest, d[i])
    idx = np.array(chosen)
    net_dist = d[np.ix_(idx, idx)]
    radius = float(d[:, idx].min(axis=1).max())
    net = Net(probes.take(idx), float(s), net_dist, radius, s / 2.0, len(probes))
    if net.min_separation < s - 1e-6 or radius > s:
        raise AssertionError("net certificate failed")
    return net


# --------------------------------------------------------------------------
# coverings of finite point sets


@dataclass(frozen=True)
class Covering:
    """Blocks of indices into a finite point set."""

    blocks: list
    d: float
    mesh: float
    multiplicity: int | None = None


def point_covering(dist: np.ndarray, blocks, d: float) -> Covering:
    mesh = 0.0
    for b in blocks:
        b = list(b)
        if len(b) > 1:
            mesh = max(mesh, float(dist[np.ix_(b, b)].max()))
    return Covering([list(map(int, b)) for b in blocks], float(d), mesh)


def d_multiplicity(cover: Covering, d: float, probe_dist: np.ndarray) -> int:
    """Most blocks met by a closed ``d``-ball around any probe.

    ``probe_dist[i, j]`` is the distance from probe ``i`` to point ``j`` of
    the covered set.
    """
    probe_dist = np.atleast_2d(probe_dist)
    hits = np.zeros(len(probe_dist), dtype=np.int64)
    for b in cover.blocks:
        hits += (probe_dist[:, list(b)] <= d).any(axis=1)
    return int(hits.max()) if len(hits) else 0


# --------------------------------------------------------------------------
# constructive cover of the comb


def _rect_distance(rho: float, phi: float, r0: float, r1: float, a0: float, a1: float) -> float:
    """Plane distance from a polar point to the polar rectangle ``[r0,r1] x [a0,a1]``."""
    if phi < a0:
        gap = a0 - phi
    elif phi > a1:
        gap = phi - a1
    else:
        gap = 0.0
    if gap >= math.pi / 2.0:
        r = r0
    else:
        r = math.atanh(math.tanh(rho) * math.cos(gap))
        r = min(max(r, r0), r1)
    return float(polar_dist(rho, 0.0, r, gap))


@dataclass(frozen=True)
class BandLayout:
    inner: float
    outer: float
    width: float  # angular width of a cell
    offset: float  # grid lines sit at (c + offset) * width


@dataclass(frozen=True, eq=False)
class CombCover:
    """Brick cover of the comb at scale ``d``.

    Sector points are cut into annular bands of radial width ``4d``.  Band
    ``j`` is cut by angular grid lines spaced so a ``d``-ball reaching the
    band spans less than a quarter of a cell; consecutive bands' lines are
    staggered by half a cell of the finer band.  A ``d``-ball then meets at
    most two bands, at most two cells in each, and never grid lines of both,
    so at most three blocks.  Hairs are cut into intervals of length ``4d``;
    the interval at the attachment joins the block of its attachment point.
    """

    spec: CombSpec
    d: float
    bands: tuple[BandLayout, ...]

    @property
    def band_width(self) -> float:
        return 4.0 * self.d

    @property
    def hair_interval(self) -> float:
        return 4.0 * self.d

    def band_index(self, rho: float) -> int:
        return min(int(rho // self.band_width), len(self.bands) - 1)

    def cell_index(self, band: int, phi: float) -> int:
        b = self.bands[band]
        return int(math.floor(phi / b.width - b.offset))

    def cell_span(self, band: int, cell: int) -> tuple[float, float]:
        b = self.bands[band]
        lo = max((cell + b.offset) * b.width, 0.0)
        hi = min((cell + 1 + b.offset) * b.width, self.spec.theta_max)
        return lo, hi

    def block_of(self, p: LocatedPoint) -> tuple:
        spec = self.spec
        if isinstance(p, InSector):
            j = self.band_index(p.rho)
            return (0, j, self.cell_index(j, p.phi))
        attach = float(spec.spokes.attach_radius[p.spoke])
        k = int((p.t - attach) // self.hair_interval)
        if k == 0:
            angle = float(spec.spokes.angle[p.spoke])
            j = self.band_index(attach)
            return (0, j, self.cell_index(j, angle))
        return (1, int(p.spoke), k)

    def _sector_pieces(self, band: int, cell: int):
        """Polar rectangles ``(r0, r1, a0, a1)`` making up a band cell."""
        b = self.bands[band]
        lo, hi = self.cell_span(band, cell)
        out = []
        for sec in self.spec.sectors:
            a0, a1 = max(lo, sec.theta_lo), min(hi, sec.theta_hi)
            r1 = min(b.outer, sec.truncation_radius)
            if a0 <= a1 and b.inner <= r1:
                out.append((b.inner, r1, a0, a1))
        return out

    def _plane_blocks_near(self, rho: float, phi: float, budget: float, found: set) -> None:
        if budget < 0:
            return
        for j, b in enumerate(self.bands):
            if b.inner > rho + budget or b.outer < rho - budget:
                continue
            if rho > budget:
                spread = math.asin(min(1.0, math.sinh(budget) / math.sinh(rho)))
            else:
                spread = math.pi
            lo = max(phi - spread, 0.0)
            hi = min(phi + spread, self.spec.theta_max)
            for c in range(self.cell_index(j, lo), self.cell_index(j, hi) + 1):
                key = (0, j, c)
                if key in found:
                    continue
                for r0, r1, a0, a1 in self._sector_pieces(j, c):
                    if _rect_distance(rho, phi, r0, r1, a0, a1) <= budget + 1e-12:
                        found.add(key)
                        break

    def _hairs_near(self, rho: float, phi: float, budget: float, found: set, skip: int = -1) -> None:
        """Non-attachment hair intervals within ``budget`` of a sector point."""
        if budget < self.hair_interval:
            return  # such intervals start 4d above their attachment
        sp = self.spec.spokes
        spread = math.pi if rho <= budget else math.asin(min(1.0, math.sinh(budget) / math.sinh(rho)))
        lo = np.searchsorted(sp.angle, phi - spread, "left")
        hi = np.searchsorted(sp.angle, phi + spread, "right")
        for s in range(lo, hi):
            if s == skip:
                continue
            a = float(sp.attach_radius[s])
            reach = budget - float(polar_dist(rho, phi, a, float(sp.angle[s])))
            k = 1
            while reach >= k * self.hair_interval and a + k * self.hair_interval <= self.spec.r_max:
                found.add((1, s, k))
                k += 1

    def blocks_near(self, p: LocatedPoint, radius: float) -> set:
        """Blocks whose ``d_X`` distance to ``p`` may be ``<= radius``.

        Distances are bounded below: plane distance for sector blocks, and for
        hair intervals the walk down to the attachment plus the plane distance
        beyond it.  Over-counting only makes the certificate stricter.
        """
        spec = self.spec
        found: set = set()
        if isinstance(p, InSector):
            self._plane_blocks_near(p.rho, p.phi, radius, found)
            self._hairs_near(p.rho, p.phi, radius, found)
            return found
        attach = float(spec.spokes.attach_radius[p.spoke])
        angle = float(spec.spokes.angle[p.spoke])
        step = self.hair_interval
        top = spec.r_max
        k_lo = int(max(p.t - radius - attach, 0.0) // step)
        k_hi = int(min(p.t + radius - attach, top - attach) // step)
        for k in range(k_lo, k_hi + 1):
            if attach + k * step > top:
                break
            found.add((1, int(p.spoke), k) if k else self.block_of(OnSpoke(p.spoke, attach)))
        left = radius - (p.t - attach)
        if left >= 0:
            self._plane_blocks_near(attach, angle, left, found)
            self._hairs_near(attach, angle, left, found, skip=p.spoke)
        return found

    def block_count(self) -> int:
        count = sum(
            1
            for j in range(len(self.bands))
            for c in self._cells(j)
            if self._sector_pieces(j, c)
        )
        attach = self.spec.spokes.attach_radius
        count += int(np.maximum(np.ceil((self.spec.r_max - attach) / self.hair_interval) - 1, 0).sum())
        return count

    def _cells(self, band: int) -> range:
        return range(self.cell_index(band, 0.0), self.cell_index(band, self.spec.theta_max) + 1)


def layout_cover(spec: CombSpec, d: float) -> CombCover:
    if d <= 0:
        raise ValueError("d must be positive")
    width = 4.0 * d
    top = max(s.truncation_radius for s in spec.sectors)
    n_bands = max(1, math.ceil(top / width))
    theta = spec.theta_max
    bands = [BandLayout(0.0, width, theta, 0.0)]
    level = 0
    for j in range(1, n_bands):
        inner = j * width
        spread = math.asin(min(1.0, math.sinh(d) / math.sinh(inner - d)))
        # widest refinement keeping every cell wider than four ball spreads
        fits = theta / (4.0 * spread * (1.0 + 1e-9))
        new_level = max(level, int(math.floor(math.log2(fits))) if fits > 1 else 0)
        prev = bands[-1]
        if new_level == 0:
            offset = 0.0
        else:
            offset = (prev.offset * 2 ** (new_level - level) + 0.5) % 1.0
        bands.append(BandLayout(inner, inner + width, theta / 2**new_level, offset))
        level = new_level
    return CombCover(spec, float(d), tuple(bands))


@dataclass(frozen=True)
class CoverCertificate:
    d: float
    multiplicity: int
    passed: bool
    mesh: float
    mesh_ratio: float
    probe_spacing: float
    probe_count: int
    block_count: int
    band_count: int
    histogram: dict = field(default_factory=dict)
    worst_probe: dict = field(default_factory=dict)
    worst_blocks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "multiplicity": self.multiplicity,
            "passed": self.passed,
            "mesh": self.mesh,
            "mesh_ratio": self.mesh_ratio,
            "probe_spacing": self.probe_spacing,
            "probe_count": self.probe_count,
            "block_count": self.block_count,
            "band_count": self.band_count,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "worst_probe": self.worst_probe,
            "worst_blocks": self.worst_blocks,
        }


def cover_mesh(metric: PathMetric, cover: CombCover) -> float:
    """Largest ``d_X`` diameter over the cover's blocks, from block samples.

    A band block is sampled at the corners and outer-arc midpoints of its
    sector pieces and at the tips of the hair intervals merged into it.
    Hair interval blocks have diameter at most ``4d``.
    """
    spec = metric.spec
    sp = spec.spokes
    tips: dict = {}
    for s in range(len(sp)):
        key = cover.block_of(OnSpoke(s, float(sp.attach_radius[s])))
        tips.setdefault(key, []).append(s)
    mesh = min(cover.hair_interval, float(np.max(spec.r_max - sp.attach_radius)))
    for j in range(len(cover.bands)):
        for c in cover._cells(j):
            pieces = cover._sector_pieces(j, c)
            if not pieces:
                continue
            sec_pts = []
            for r0, r1, a0, a1 in pieces:
                for r in (r0, r1):
                    for a in (a0, a1, (a0 + a1) / 2.0):
                        sec_pts.append((r, a))
            rho = np.array([x[0] for x in sec_pts])
            phi = np.array([x[1] for x in sec_pts])
            owner = np.array([_owner(spec, r, a) for r, a in sec_pts])
            batch = PointBatch(owner, rho, phi, np.full(len(rho), -1, dtype=np.int64))
            hs = tips.get((0, j, c), [])
            if hs:
                hs = np.array(hs)
                t = np.minimum(sp.attach_radius[hs] + cover.hair_interval, spec.r_max)
                batch = PointBatch.concat([batch, spoke_batch(spec, hs, t)])
            mesh = max(mesh, float(metric.pairwise(batch).max()))
    return mesh


def _owner(spec: CombSpec, rho: float, phi: float) -> int:
    for sec in spec.sectors:
        if sec.theta_lo - 1e-12 <= phi <= sec.theta_hi + 1e-12 and rho <= sec.truncation_radius + 1e-9:
            return sec.index
    raise ValueError("sample point outside the comb")


def build_cover(metric: PathMetric, d: float, probe_spacing: float | None = None) -> CoverCertificate:
    """Construct the brick cover at scale ``d`` and certify its ``d``-multiplicity.

    Probes sit on a grid of spacing ``d/2`` over every sector and hair.
    """
    spec = metric.spec
    cover = layout_cover(spec, d)
    h = d / 2.0 if probe_spacing is None else probe_spacing
    probes = comb_grid(spec, h)
    histogram: dict = {}
    worst = (-1, None, [])
    for i in range(len(probes)):
        p = probes.point(i)
        blocks = cover.blocks_near(p, d)
        count = len(blocks)
        histogram[count] = histogram.get(count, 0) + 1
        if count > worst[0]:
            worst = (count, p, sorted(blocks))
    mesh = cover_mesh(metric, cover)
    p = worst[1]
    probe_doc = (
        {"sector": p.sector, "rho": p.rho, "phi": p.phi}
        if isinstance(p, InSector)
        else {"spoke": p.spoke, "t": p.t}
    )
    return CoverCertificate(
        d=float(d),
        multiplicity=int(worst[0]),
        passed=worst[0] <= 3,
        mesh=mesh,
        mesh_ratio=mesh / d,
        probe_spacing=h,
        probe_count=len(probes),
        block_count=cover.block_count(),
        band_count=len(cover.bands),
        histogram=histogram,
        worst_probe=probe_doc,
        worst_blocks=[list(b) for b in worst[2]],
    )


# --------------------------------------------------------------------------
# lower bound: two-family decompositions of a net


class _BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class DecompositionVerdict:
    verdict: str  # "SAT", "UNSAT" or "UNKNOWN"
    d: float
    D: float
    nodes_explored: int
    families: list | None = None  # per-point family (0 or 1) when SAT
    blocks: list | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "d": self.d,
            "D": self.D,
            "nodes_explored": self.nodes_explored,
            "families": self.families,
            "blocks": self.blocks,
        }


def _proximity_order(dist: np.ndarray) -> list[int]:
    n = len(dist)
    order = [0]
    nearest = dist[0].copy()
    done = np.zeros(n, dtype=bool)
    done[0] = True
    for _ in range(n - 1):
        cand = np.where(done, np.inf, nearest)
        i = int(np.argmin(cand))
        order.append(i)
        done[i] = True
        nearest = np.minimum(nearest, dist[i])
    return order


def decomposition_search(dist, d: float, D: float, budget: int = 10**7) -> DecompositionVerdict:
    """Exhaustively search for a split into two ``d``-disconnected families.

    Points of one family closer than ``d`` must share a block, so each
    family's blocks are the components of its ``< d`` graph; a colouring
    works iff no component has diameter above ``D``.  Points are coloured in
    nearest-first order with the first point fixed to family 0, and a branch
    is cut as soon as a component grows too wide.  Each colouring attempt
    counts as one node against ``budget``.
    """
    dist = np.asarray(dist.dist if isinstance(dist, Net) else dist, dtype=float)
    n = len(dist)
    if n == 0:
        return DecompositionVerdict("SAT", d, D, 0, [], [])
    order = _proximity_order(dist)
    close = [np.flatnonzero((dist[i] < d) & (np.arange(n) != i)) for i in range(n)]
    colour = np.full(n, -1, dtype=np.int64)
    comp = np.full(n, -1, dtype=np.int64)
    members: dict[int, list[int]] = {}
    nodes = 0
    fresh = 0

    def place(step: int) -> bool:
        nonlocal nodes, fresh
        if step == n:
            return True
        i = order[step]
        for c in ((0,) if step == 0 else (0, 1)):
            nodes += 1
            if nodes > budget:
                raise _BudgetExhausted
            nb = close[i]
            touching = sorted({int(comp[j]) for j in nb[colour[nb] == c]})
            merged = [i]
            for k in touching:
                merged.extend(members[k])
            if len(merged) > 1:
                if dist[i, merged].max() > D:
                    continue
                if len(touching) > 1 and dist[np.ix_(merged, merged)].max() > D:
                    continue
            label = fresh
            fresh += 1
            saved = {k: members.pop(k) for k in touching}
            members[label] = merged
            comp[merged] = label
            colour[i] = c
            if place(step + 1):
                return True
            colour[i] = -1
            del members[label]
            for k, pts in saved.items():
                members[k] = pts
                comp[pts] = k
            comp[i] = -1
        return False

    import sys

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, n + 100))
    try:
        found = place(0)
    except _BudgetExhausted:
        return DecompositionVerdict("UNKNOWN", d, D, nodes)
    finally:
        sys.setrecursionlimit(limit)
    if not found:
        return DecompositionVerdict("UNSAT", d, D, nodes)
    families = [int(x) for x in colour]
    blocks = [sorted(int(x) for x in pts) for pts in members.values()]
    blocks.sort()
    return DecompositionVerdict("SAT", d, D, nodes, families, blocks)


def verify_decomposition(dist: np.ndarray, families, blocks, d: float, D: float) -> bool:
    """Check a claimed two-family decomposition straight from the distances."""
    dist = np.asarray(dist, dtype=float)
    n = len(dist)
    flat = sorted(i for b in blocks for i in b)
    if flat != list(range(n)):
        return False
    for b in blocks:
        if len({families[i] for i in b}) != 1:
            return False
        if len(b) > 1 and dist[np.ix_(b, b)].max() > D:
            return False
    for x in range(len(blocks)):
        for y in range(x + 1, len(blocks)):
            bx, by = blocks[x], blocks[y]
            if families[bx[0]] == families[by[0]] and dist[np.ix_(bx, by)].min() < d:
                return False
    return True
