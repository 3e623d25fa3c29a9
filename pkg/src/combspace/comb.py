"""Deterministic construction of the comb space.

Sector ``n`` is the wedge between the rays at angles ``theta_lo`` and
``theta_hi = theta_lo + pi / 2**n`` truncated at hyperbolic radius ``N_n``.
Its outer arc is cut into equal pieces of length in ``[1/2, 1]`` and a spoke
ray leaves the origin through every cut vertex.  The part of a spoke beyond
its attachment radius is a one dimensional *hair*.

Spokes are stored column-wise (:class:`SpokeTable`) because the deeper
sectors carry millions of them.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .hyperbolic import PolarPoint, arc_length, polar_dist, ray_distance

MAX_SECTORS = 8
ANGLE_TOL = 1e-12
RADIUS_TOL = 1e-9

KIND_ORIGINAL = 0
KIND_ARC_VERTEX = 1
_KIND_NAMES = {KIND_ORIGINAL: "original_ray", KIND_ARC_VERTEX: "arc_vertex"}


class DepthLimitError(ValueError):
    pass


def sector_angle(n: int) -> float:
    return math.pi / 2.0**n


def _check_depth(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"sector index must be a positive integer, got {n}")
    if n > MAX_SECTORS:
        raise DepthLimitError(
            f"sector {n} exceeds the depth limit {MAX_SECTORS}: its outer arc "
            f"would carry ~e^(2n) vertices"
        )


def inner_ball_center(n: int, theta_lo: float | None = None) -> PolarPoint:
    """Centre of a ball of radius ``n`` inscribed in sector ``n``.

    It sits on the bisector at ``asinh(sinh(n) / sin(alpha/2))``, which puts it
    at distance exactly ``n`` from both bounding rays.
    """
    _check_depth(n)
    alpha = sector_angle(n)
    if theta_lo is None:
        theta_lo = sector_start(n)
    rho = math.asinh(math.sinh(n) / math.sin(alpha / 2.0))
    return PolarPoint(rho, theta_lo + alpha / 2.0)


def truncation_radius(n: int) -> float:
    """Radius ``N_n`` of the ball around the origin containing the inscribed ball."""
    return inner_ball_center(n).rho + n


def sector_start(n: int) -> float:
    """Angle of the first bounding ray of sector ``n`` (partial sums of pi/2^k)."""
    theta = 0.0
    for k in range(1, n):
        theta += sector_angle(k)
    return theta


def subdivide_arc(n: int, theta_lo: float | None = None) -> np.ndarray:
    """Cut the outer arc of sector ``n`` into ``ceil(length)`` equal pieces.

    Returns the ``m + 1`` vertex angles, both endpoints included.
    """
    _check_depth(n)
    alpha = sector_angle(n)
    if theta_lo is None:
        theta_lo = sector_start(n)
    length = arc_length(truncation_radius(n), alpha)
    assert length >= 0.5, "outer arc shorter than half a unit"
    m = math.ceil(length)
    piece = length / m
    assert 0.5 <= piece <= 1.0, f"piece length {piece} outside [1/2, 1]"
    angles = theta_lo + np.arange(m + 1, dtype=float) * (alpha / m)
    angles[-1] = theta_lo + alpha
    return angles


@dataclass(frozen=True, eq=False)
class SectorSpec:
    index: int
    theta_lo: float
    theta_hi: float
    alpha: float
    center: PolarPoint
    center_radius: float
    truncation_radius: float
    vertex_angles: np.ndarray

    @property
    def pieces(self) -> int:
        return len(self.vertex_angles) - 1

    @property
    def piece_length(self) -> float:
        return arc_length(self.truncation_radius, self.alpha) / self.pieces


@dataclass(frozen=True)
class SpokeRay:
    id: int
    angle: float
    attach_radius: float
    origin_kind: str
    ray: int | None
    sector: int
    vertex: int | None


@dataclass(frozen=True, eq=False)
class SpokeTable:
    """Column storage for spokes, ordered by increasing angle.

    ``sector`` is the sector owning the attachment point; ``ray`` is the index
    ``k`` of an original ray ``a_k`` (or -1); ``vertex`` is the arc vertex index
    within ``sector`` for arc-vertex spokes (or -1).
    """

    angle: np.ndarray
    attach_radius: np.ndarray
    kind: np.ndarray
    ray: np.ndarray
    sector: np.ndarray
    vertex: np.ndarray

    def __len__(self) -> int:
        return len(self.angle)

    def get(self, i: int) -> SpokeRay:
        if not 0 <= i < len(self):
            raise KeyError(f"unknown spoke id {i}")
        kind = int(self.kind[i])
        return SpokeRay(
            id=int(i),
            angle=float(self.angle[i]),
            attach_radius=float(self.attach_radius[i]),
            origin_kind=_KIND_NAMES[kind],
            ray=int(self.ray[i]) if kind == KIND_ORIGINAL else None,
            sector=int(self.sector[i]),
            vertex=int(self.vertex[i]) if kind == KIND_ARC_VERTEX else None,
        )


@dataclass(frozen=True, eq=False)
class CombSpec:
    sectors: tuple[SectorSpec, ...]
    spokes: SpokeTable
    r_max: float
    hair_extension: float

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    def sector(self, n: int) -> SectorSpec:
        if not 1 <= n <= len(self.sectors):
            raise KeyError(f"unknown sector {n}")
        return self.sectors[n - 1]

    def spoke(self, i: int) -> SpokeRay:
        return self.spokes.get(i)

    @property
    def theta_max(self) -> float:
        return self.sectors[-1].theta_hi

    @property
    def spoke_offsets(self) -> np.ndarray:
        """Spoke id of vertex 0 of each sector (index ``n - 1``)."""
        out = np.zeros(self.n_sectors, dtype=np.int64)
        for i in range(1, self.n_sectors):
            out[i] = out[i - 1] + self.sectors[i - 1].pieces
        return out

    def vertex_spoke(self, n: int, k: int) -> int:
        sec = self.sector(n)
        if not 0 <= k <= sec.pieces:
            raise KeyError(f"sector {n} has no vertex {k}")
        return int(self.spoke_offsets[n - 1] + k)

    @property
    def truncations(self) -> np.ndarray:
        return np.array([s.truncation_radius for s in self.sectors])

    @property
    def starts(self) -> np.ndarray:
        return np.array([s.theta_lo for s in self.sectors])

    @property
    def ends(self) -> np.ndarray:
        return np.array([s.theta_hi for s in self.sectors])

    def to_json(self) -> str:
        return spec_to_json(self)

    @property
    def digest(self) -> str:
        cached = self.__dict__.get("_digest")
        if cached is None:
            cached = hashlib.sha256(self.to_json().encode()).hexdigest()
            object.__setattr__(self, "_digest", cached)
        return cached


def build(n_sectors: int, hair_extension: float = 10.0) -> CombSpec:
    """Construct the comb with ``n_sectors`` truncated sectors.

    Hairs are truncated at ``r_max = max N_n + hair_extension``.
    """
    _check_depth(n_sectors)
    if not (hair_extension >= 0.0 and math.isfinite(hair_extension)):
        raise ValueError("hair_extension must be a finite non-negative number")
    sectors = []
    theta = 0.0
    for n in range(1, n_sectors + 1):
        alpha = sector_angle(n)
        center = inner_ball_center(n, theta)
        trunc = center.rho + n
        sectors.append(
            SectorSpec(
                index=n,
                theta_lo=theta,
                theta_hi=theta + alpha,
                alpha=alpha,
                center=center,
                center_radius=center.rho,
                truncation_radius=trunc,
                vertex_angles=subdivide_arc(n, theta),
            )
        )
        theta += alpha
    spokes = _spoke_table(sectors)
    r_max = max(s.truncation_radius for s in sectors) + float(hair_extension)
    return CombSpec(tuple(sectors), spokes, r_max, float(hair_extension))


def _spoke_table(sectors: list[SectorSpec]) -> SpokeTable:
    angle, attach, kind, ray, owner, vertex = [], [], [], [], [], []
    count = len(sectors)
    for sec in sectors:
        n = sec.index
        m = sec.pieces
        first = 0 if n == 1 else 1  # vertex 0 of later sectors is a shared ray
        ks = np.arange(first, m + 1)
        angle.append(sec.vertex_angles[first:])
        att = np.full(len(ks), sec.truncation_radius)
        knd = np.full(len(ks), KIND_ARC_VERTEX, dtype=np.int8)
        ry = np.full(len(ks), -1, dtype=np.int32)
        own = np.full(len(ks), n, dtype=np.int32)
        vtx = ks.astype(np.int32)
        # endpoint vertices are the original rays a_n and a_{n+1}
        if first == 0:
            knd[0], ry[0] = KIND_ORIGINAL, n
            vtx[0] = 0
        knd[-1], ry[-1] = KIND_ORIGINAL, n + 1
        if n < count:
            # a_{n+1} continues along sector n+1, which reaches further out
            att[-1] = sectors[n].truncation_radius
            own[-1] = n + 1
            vtx[-1] = 0
        attach.append(att)
        kind.append(knd)
        ray.append(ry)
        owner.append(own)
        vertex.append(vtx)
    return SpokeTable(
        angle=np.concatenate(angle),
        attach_radius=np.concatenate(attach),
        kind=np.concatenate(kind),
        ray=np.concatenate(ray),
        sector=np.concatenate(owner),
        vertex=np.concatenate(vertex),
    )


# --------------------------------------------------------------------------
# located points

@dataclass(frozen=True)
class InSector:
    """A point of truncated sector ``sector`` in polar coordinates."""

    sector: int
    rho: float
    phi: float


@dataclass(frozen=True)
class OnSpoke:
    """A point at radius ``t`` on spoke ``spoke`` (``t >= attach_radius``)."""

    spoke: int
    t: float


LocatedPoint = Union[InSector, OnSpoke]


def contains(spec: CombSpec, p: LocatedPoint) -> bool:
    if isinstance(p, InSector):
        sec = spec.sector(p.sector)
        return (
            sec.theta_lo - ANGLE_TOL <= p.phi <= sec.theta_hi + ANGLE_TOL
            and -RADIUS_TOL <= p.rho <= sec.truncation_radius + RADIUS_TOL
        )
    if isinstance(p, OnSpoke):
        ray = spec.spoke(p.spoke)
        return ray.attach_radius - RADIUS_TOL <= p.t <= spec.r_max + RADIUS_TOL
    raise TypeError(f"not a located point: {p!r}")


def sectors_containing(spec: CombSpec, rho: float, phi: float) -> list[int]:
    """All sectors whose closed truncated wedge contains the polar point."""
    if rho <= RADIUS_TOL:
        return list(range(1, spec.n_sectors + 1))
    out = []
    for sec in spec.sectors:
        if (
            sec.theta_lo - ANGLE_TOL <= phi <= sec.theta_hi + ANGLE_TOL
            and rho <= sec.truncation_radius + RADIUS_TOL
        ):
            out.append(sec.index)
    return out


def position(spec: CombSpec, p: LocatedPoint) -> PolarPoint:
    """Polar coordinates of a located point in the ambient plane."""
    if isinstance(p, InSector):
        return PolarPoint(max(p.rho, 0.0), p.phi)
    return PolarPoint(p.t, float(spec.spokes.angle[p.spoke]))


def canonicalize(spec: CombSpec, p: LocatedPoint) -> LocatedPoint:
    """Prefer the sector form with the lowest sector index when one exists."""
    if not contains(spec, p):
        raise ValueError(f"{p!r} is not a point of the comb")
    pos = position(spec, p)
    owners = sectors_containing(spec, pos.rho, pos.phi)
    if owners:
        return InSector(owners[0], pos.rho, pos.phi)
    return p


def nearest_spoke(spec: CombSpec, p: LocatedPoint) -> tuple[int, float]:
    """Closest spoke ray to ``p`` in the plane metric, with its distance."""
    if not contains(spec, p):
        raise ValueError(f"{p!r} is not a point of the comb")
    if isinstance(p, OnSpoke):
        return p.spoke, 0.0
    ids, dists = nearest_spokes(spec, np.array([p.sector]), np.array([p.rho]), np.array([p.phi]))
    return int(ids[0]), float(dists[0])


def nearest_spokes(spec: CombSpec, sector, rho, phi):
    """Vectorized :func:`nearest_spoke` for sector points.

    The distance to a ray grows with the angular gap, so only the two arc
    vertices bracketing the point's angle need checking.
    """
    sector = np.asarray(sector)
    rho = np.asarray(rho, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ids = np.empty(len(rho), dtype=np.int64)
    dists = np.empty(len(rho))
    offsets = spec.spoke_offsets
    for n in np.unique(sector):
        sel = sector == n
        sec = spec.sector(int(n))
        verts = sec.vertex_angles
        hi = np.clip(np.searchsorted(verts, phi[sel]), 1, len(verts) - 1)
        lo = hi - 1
        d_lo = ray_distance(rho[sel], phi[sel], verts[lo])
        d_hi = ray_distance(rho[sel], phi[sel], verts[hi])
        take_hi = d_hi < d_lo
        k = np.where(take_hi, hi, lo)
        ids[sel] = offsets[n - 1] + k
        dists[sel] = np.where(take_hi, d_hi, d_lo)
    return ids, dists


# --------------------------------------------------------------------------
# batches of points for vectorized work

@dataclass(frozen=True, eq=False)
class PointBatch:
    """Column form of many located points.

    ``spoke`` is -1 for sector points; for those ``sector``, ``rho`` and
    ``phi`` hold the position.  Spoke points carry ``t`` in ``rho`` and the
    spoke angle in ``phi``; ``sector`` is the sector owning the attachment.
    """

    sector: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    spoke: np.ndarray

    def __len__(self) -> int:
        return len(self.rho)

    @property
    def on_hair(self) -> np.ndarray:
        return self.spoke >= 0

    def take(self, idx) -> "PointBatch":
        idx = np.asarray(idx)
        return PointBatch(self.sector[idx], self.rho[idx], self.phi[idx], self.spoke[idx])

    def point(self, i: int) -> LocatedPoint:
        if self.spoke[i] >= 0:
            return OnSpoke(int(self.spoke[i]), float(self.rho[i]))
        return InSector(int(self.sector[i]), float(self.rho[i]), float(self.phi[i]))

    def points(self) -> list[LocatedPoint]:
        return [self.point(i) for i in range(len(self))]

    @staticmethod
    def concat(batches) -> "PointBatch":
        batches = list(batches)
        return PointBatch(
            np.concatenate([b.sector for b in batches]),
            np.concatenate([b.rho for b in batches]),
            np.concatenate([b.phi for b in batches]),
            np.concatenate([b.spoke for b in batches]),
        )


def batch_from_points(spec: CombSpec, points) -> PointBatch:
    sector, rho, phi, spoke = [], [], [], []
    for p in points:
        if not contains(spec, p):
            raise ValueError(f"{p!r} is not a point of the comb")
        if isinstance(p, InSector):
            sector.append(p.sector)
            rho.append(max(p.rho, 0.0))
            phi.append(p.phi)
            spoke.append(-1)
        else:
            sector.append(int(spec.spokes.sector[p.spoke]))
            rho.append(p.t)
            phi.append(float(spec.spokes.angle[p.spoke]))
            spoke.append(p.spoke)
    return PointBatch(
        np.array(sector, dtype=np.int64),
        np.array(rho, dtype=float),
        np.array(phi, dtype=float),
        np.array(spoke, dtype=np.int64),
    )


def sector_batch(n: int, rho, phi) -> PointBatch:
    rho = np.asarray(rho, dtype=float)
    return PointBatch(
        np.full(len(rho), n, dtype=np.int64),
        rho,
        np.asarray(phi, dtype=float),
        np.full(len(rho), -1, dtype=np.int64),
    )


def spoke_batch(spec: CombSpec, spoke, t) -> PointBatch:
    spoke = np.asarray(spoke, dtype=np.int64)
    return PointBatch(
        spec.spokes.sector[spoke].astype(np.int64),
        np.asarray(t, dtype=float),
        spec.spokes.angle[spoke],
        spoke,
    )


def sample_points(
    spec: CombSpec,
    rng: np.random.Generator,
    size: int,
    radius_cap: float | None = None,
    hair_fraction: float = 0.5,
) -> PointBatch:
    """Random points of the comb up to ``radius_cap``.

    With probability ``hair_fraction`` a point is drawn on the hairs (hair
    chosen in proportion to its length below the cap, position uniform in
    ``t``), otherwise in a sector (sector chosen in proportion to its
    coordinate area ``alpha * min(N_n, cap)``, then ``rho`` and ``phi``
    uniform).  Uniform coordinates keep samples from piling up on the outer
    arcs, where hyperbolic area concentrates.
    """
    cap = spec.r_max if radius_cap is None else min(radius_cap, spec.r_max)
    trunc = spec.truncations
    starts = spec.starts
    alphas = np.array([s.alpha for s in spec.sectors])
    heights = np.minimum(trunc, cap)
    weights = alphas * heights
    lengths = np.clip(cap - spec.spokes.attach_radius, 0.0, None)
    total_hair = lengths.sum()
    on_hair = rng.random(size) < hair_fraction
    if total_hair <= 0.0:
        on_hair[:] = False
    n_hair = int(on_hair.sum())
    n_sec = size - n_hair

    sec_idx = rng.choice(len(weights), size=n_sec, p=weights / weights.sum())
    s_rho = rng.random(n_sec) * heights[sec_idx]
    s_phi = starts[sec_idx] + rng.random(n_sec) * alphas[sec_idx]

    sector = np.empty(size, dtype=np.int64)
    rho = np.empty(size)
    phi = np.empty(size)
    spoke = np.full(size, -1, dtype=np.int64)
    sector[~on_hair] = sec_idx + 1
    rho[~on_hair] = s_rho
    phi[~on_hair] = s_phi
    if n_hair:
        h_idx = rng.choice(len(lengths), size=n_hair, p=lengths / total_hair)
        h_t = spec.spokes.attach_radius[h_idx] + rng.random(n_hair) * lengths[h_idx]
        sector[on_hair] = spec.spokes.sector[h_idx]
        rho[on_hair] = h_t
        phi[on_hair] = spec.spokes.angle[h_idx]
        spoke[on_hair] = h_idx
    return PointBatch(sector, rho, phi, spoke)


def plane_distance(spec: CombSpec, p: LocatedPoint, q: LocatedPoint) -> float:
    a = position(spec, p)
    b = position(spec, q)
    return float(polar_dist(a.rho, a.phi, b.rho, b.phi))


# --------------------------------------------------------------------------
# serialization

def _float_list(arr) -> list[float]:
    return [float(x) for x in arr]


def spec_to_dict(spec: CombSpec) -> dict:
    sp = spec.spokes
    return {
        "format": "combspace.combspec/1",
        "n_sectors": spec.n_sectors,
        "hair_extension": spec.hair_extension,
        "r_max": spec.r_max,
        "sectors": [
            {
                "index": s.index,
                "theta_lo": s.theta_lo,
                "theta_hi": s.theta_hi,
                "alpha": s.alpha,
                "center": {"rho": s.center.rho, "phi": s.center.phi},
                "center_radius": s.center_radius,
                "truncation_radius": s.truncation_radius,
                "vertex_angles": _float_list(s.vertex_angles),
            }
            for s in spec.sectors
        ],
        "spokes": {
            "angle": _float_list(sp.angle),
            "attach_radius": _float_list(sp.attach_radius),
            "origin_kind": [_KIND_NAMES[int(k)] for k in sp.kind],
            "ray": [int(x) for x in sp.ray],
            "sector": [int(x) for x in sp.sector],
            "vertex": [int(x) for x in sp.vertex],
        },
    }


def spec_to_json(spec: CombSpec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True, indent=1) + "\n"


def spec_from_dict(doc: dict) -> CombSpec:
    sectors = []
    for s in doc["sectors"]:
        sectors.append(
            SectorSpec(
                index=int(s["index"]),
                theta_lo=float(s["theta_lo"]),
                theta_hi=float(s["theta_hi"]),
                alpha=float(s["alpha"]),
                center=PolarPoint(float(s["center"]["rho"]), float(s["center"]["phi"])),
                center_radius=float(s["center_radius"]),
                truncation_radius=float(s["truncation_radius"]),
                vertex_angles=np.array(s["vertex_angles"], dtype=float),
            )
        )
    sp = doc["spokes"]
    kinds = {v: k for k, v in _KIND_NAMES.items()}
    table = SpokeTable(
        angle=np.array(sp["angle"], dtype=float),
        attach_radius=np.array(sp["attach_radius"], dtype=float),
        kind=np.array([kinds[k] for k in sp["origin_kind"]], dtype=np.int8),
        ray=np.array(sp["ray"], dtype=np.int32),
        sector=np.array(sp["sector"], dtype=np.int32),
        vertex=np.array(sp["vertex"], dtype=np.int32),
    )
    return CombSpec(tuple(sectors), table, float(doc["r_max"]), float(doc["hair_extension"]))


def spec_from_json(text: str) -> CombSpec:
    return spec_from_dict(json.loads(text))


@dataclass(frozen=True)
class VisualityReport:
    sample_count: int
    max_distance: float
    mean_distance: float
    bound: float
    passed: bool
    worst_point: dict

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "max_distance": self.max_distance,
            "mean_distance": self.mean_distance,
            "bound": self.bound,
            "passed": self.passed,
            "worst_point": self.worst_point,
        }


def visual_check(
    spec: CombSpec, rng: np.random.Generator, sample_count: int = 10_000, bound: float = 1.0
) -> VisualityReport:
    """Distance from random sector points to the nearest spoke ray.

    Hair points sit on their spoke, so only sector points are sampled.
    """
    pts = sample_points(spec, rng, sample_count, hair_fraction=0.0)
    _, dists = nearest_spokes(spec, pts.sector, pts.rho, pts.phi)
    i = int(np.argmax(dists))
    worst = {"sector": int(pts.sector[i]), "rho": float(pts.rho[i]), "phi": float(pts.phi[i])}
    top = float(dists.max())
    return VisualityReport(sample_count, top, float(dists.mean()), bound, top <= bound + 1e-6, worst)
