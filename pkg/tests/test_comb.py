import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combspace.comb import (
    MAX_SECTORS,
    DepthLimitError,
    InSector,
    OnSpoke,
    build,
    canonicalize,
    contains,
    inner_ball_center,
    nearest_spoke,
    sample_points,
    sector_start,
    spec_from_json,
    spec_to_json,
    subdivide_arc,
    truncation_radius,
    visual_check,
)
from combspace.hyperbolic import arc_length, polar_dist, ray_distance
from oracles import polyline_arc_length


def _bisect_center_radius(n):
    """Radius on the bisector at distance n from the bounding rays, by bisection."""
    half = math.pi / 2**n / 2
    lo, hi = 0.0, 60.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if float(ray_distance(mid, half, 0.0)) < n:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_sector_starts():
    assert build(3, 0).sectors[2].theta_lo == pytest.approx(3 * math.pi / 4, abs=1e-15)
    for n in range(1, 9):
        assert sector_start(n) == pytest.approx(math.pi * (1 - 2.0 ** (1 - n)), abs=1e-12)


@pytest.mark.parametrize("n", range(1, 9))
def test_center_radius_against_bisection(n):
    assert inner_ball_center(n).rho == pytest.approx(_bisect_center_radius(n), abs=1e-9)


def test_first_sector_frozen_values():
    c = inner_ball_center(1)
    # the quoted values 1.2812 / 2.2812 are rounded; closed form gives 1.281385
    assert c.rho == pytest.approx(1.2812, abs=5e-4)
    assert c.phi == pytest.approx(math.pi / 4, abs=1e-15)
    assert truncation_radius(1) == pytest.approx(2.2812, abs=5e-4)
    assert inner_ball_center(2).phi == pytest.approx(math.pi / 2 + math.pi / 8, abs=1e-15)
    verts = subdivide_arc(1)
    assert len(verts) == 9
    piece = polyline_arc_length(truncation_radius(1), math.pi / 2) / 8
    assert piece == pytest.approx(0.951, abs=1e-3)


def test_build5_frozen_counts():
    # pieces per sector computed from ceil(alpha sinh N_n) in the oracle run
    spec = build(5, 10)
    assert [s.pieces for s in spec.sectors] == [8, 56, 406, 2985, 22035]
    assert len(spec.spokes) == 25491
    np.testing.assert_allclose(spec.truncations, [2.2814, 4.9448, 7.6319, 10.3223, 13.0145], atol=1e-4)


@pytest.mark.parametrize("n", range(1, 9))
def test_construction_invariants(n):
    spec = build(n, 0)
    for sec in spec.sectors:
        c = sec.center
        assert float(ray_distance(c.rho, c.phi, sec.theta_lo)) == pytest.approx(sec.index, abs=1e-9)
        assert float(ray_distance(c.rho, c.phi, sec.theta_hi)) == pytest.approx(sec.index, abs=1e-9)
        assert sec.truncation_radius == pytest.approx(c.rho + sec.index, abs=1e-12)
        assert sec.truncation_radius >= 2 * sec.index
        assert 0.5 <= sec.piece_length <= 1.0
        assert np.ptp(np.diff(sec.vertex_angles)) < 1e-12
    assert np.all(np.diff(spec.truncations) > 0)
    assert spec.theta_max == pytest.approx(math.pi * (1 - 2.0**-n), abs=1e-12)
    # every vertex angle yields one spoke, shared rays counted once
    assert len(spec.spokes) == sum(s.pieces + 1 for s in spec.sectors) - (n - 1)
    assert np.all(np.diff(spec.spokes.angle) > 0)


def test_depth_limit():
    with pytest.raises(DepthLimitError):
        build(30)
    with pytest.raises(DepthLimitError):
        build(MAX_SECTORS + 1)
    with pytest.raises(ValueError):
        build(0)


def test_single_sector_spokes():
    spec = build(1)
    assert len(spec.spokes) == 9
    assert spec.spoke(0).origin_kind == "original_ray"
    assert spec.spoke(8).origin_kind == "original_ray"
    assert spec.spoke(4).origin_kind == "arc_vertex"


def test_original_ray_attaches_in_later_sector():
    spec = build(3)
    s = spec.vertex_spoke(2, 0)
    assert spec.spoke(s).attach_radius == spec.sector(2).truncation_radius
    assert spec.spoke(s).angle == spec.sector(2).theta_lo


def test_contains_examples():
    spec = build(2)
    n1 = spec.sector(1).truncation_radius
    assert contains(spec, InSector(1, n1, math.pi / 4))
    assert not contains(spec, InSector(1, n1 + 0.1, math.pi / 4))
    assert contains(spec, OnSpoke(3, spec.spoke(3).attach_radius))
    assert not contains(spec, OnSpoke(3, spec.spoke(3).attach_radius - 0.1))
    with pytest.raises(KeyError):
        contains(spec, InSector(7, 0.0, 0.0))


def test_canonicalize_prefers_lowest_sector():
    spec = build(3)
    a2 = spec.sector(2).theta_lo
    assert canonicalize(spec, InSector(2, 1.0, a2)) == InSector(1, 1.0, a2)
    hair = OnSpoke(5, spec.spoke(5).attach_radius + 1.0)
    assert canonicalize(spec, hair) == hair


def test_nearest_spoke_examples():
    spec = build(1)
    n1 = spec.sector(1).truncation_radius
    verts = spec.sector(1).vertex_angles
    assert nearest_spoke(spec, OnSpoke(2, n1 + 1)) == (2, 0.0)
    mid = (verts[3] + verts[4]) / 2
    _, d = nearest_spoke(spec, InSector(1, n1, mid))
    # oracle: minimize over sampled points of every spoke ray
    ts = np.linspace(0, spec.r_max, 20001)
    brute = min(float(np.min(polar_dist(n1, mid, ts, a))) for a in spec.spokes.angle)
    assert d == pytest.approx(brute, abs=1e-6)
    assert d <= 0.5


def test_visuality_sampled(comb5):
    rep = visual_check(comb5, np.random.default_rng(1), 10_000)
    assert rep.passed and rep.max_distance <= 1 + 1e-6


def test_json_roundtrip_is_bit_exact():
    spec = build(4, 3.5)
    text = spec_to_json(spec)
    again = spec_from_json(text)
    assert spec_to_json(again) == text
    assert again.digest == spec.digest
    np.testing.assert_array_equal(again.spokes.angle, spec.spokes.angle)
    doc = json.loads(text)
    assert list(doc) == sorted(doc)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_samples_lie_in_comb(seed, n):
    spec = build(n, 5)
    pts = sample_points(spec, np.random.default_rng(seed), 200, radius_cap=8)
    for p in pts.points():
        assert contains(spec, p)


@settings(max_examples=30)
@given(st.integers(1, 6), st.floats(0, 1), st.data())
def test_star_shaped_radial_segments(n, frac, data):
    spec = build(n, 0)
    sec = spec.sector(n)
    k = data.draw(st.integers(0, sec.pieces))
    p = InSector(n, frac * sec.truncation_radius, float(sec.vertex_angles[k]))
    assert contains(spec, p)


def test_arc_length_of_sector_arcs():
    # the plain arcosh chord loses digits on long arcs, so only the first sectors
    for n in (1, 2):
        sec = build(n).sector(n)
        k = 100 * sec.pieces
        coarse = polyline_arc_length(sec.truncation_radius, sec.alpha, k)
        fine = polyline_arc_length(sec.truncation_radius, sec.alpha, 2 * k)
        # Richardson step removes the leading chord error
        assert arc_length(sec.truncation_radius, sec.alpha) == pytest.approx((4 * fine - coarse) / 3, rel=1e-7)
