import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combspace.hyperbolic import (
    ORIGIN,
    DiskPoint,
    InvalidPointError,
    PolarPoint,
    arc_length,
    disk_to_polar,
    dist,
    dist_to_radial_ray,
    geodesic_point,
    gromov_product,
    polar_dist,
    polar_to_disk,
    translate_polar,
)
from oracles import polyline_arc_length

radius = st.floats(0.0, 0.95)
angle = st.floats(0.0, 2 * math.pi)


@st.composite
def disk_points(draw):
    r, a = draw(radius), draw(angle)
    return DiskPoint(r * math.cos(a), r * math.sin(a))


def test_distance_from_origin_closed_form():
    # 2 artanh(1/2) = ln 3
    assert dist(ORIGIN, DiskPoint(0.5, 0.0)) == pytest.approx(math.log(3.0), abs=1e-12)


def test_boundary_points_rejected():
    with pytest.raises(InvalidPointError):
        DiskPoint(1.0, 0.0)
    with pytest.raises(InvalidPointError):
        DiskPoint(0.0, 1.0 - 1e-13)


def test_polar_to_disk_radius():
    p = polar_to_disk(PolarPoint(10.0, 0.3))
    assert p.radius == pytest.approx(math.tanh(5.0), abs=1e-15)
    assert dist(ORIGIN, p) == pytest.approx(10.0, abs=1e-9)


def test_polar_roundtrip():
    q = disk_to_polar(polar_to_disk(PolarPoint(3.0, 5.0)))
    assert q.rho == pytest.approx(3.0, abs=1e-12)
    assert q.phi == pytest.approx(5.0, abs=1e-12)


def test_negative_radius_rejected():
    with pytest.raises(InvalidPointError):
        PolarPoint(-1.0, 0.0)


@pytest.mark.parametrize("r1,r2,gap", [(26.0, 27.5, 0.3), (30.0, 30.0, 1e-6), (40.0, 1.0, 2.0), (60.0, 59.0, 3.0)])
def test_polar_dist_against_high_precision(r1, r2, gap):
    mpmath.mp.dps = 60
    c = mpmath.cosh(r1) * mpmath.cosh(r2) - mpmath.sinh(r1) * mpmath.sinh(r2) * mpmath.cos(gap)
    expect = float(mpmath.acosh(c))
    assert float(polar_dist(r1, 0.0, r2, gap)) == pytest.approx(expect, rel=1e-12, abs=1e-9)


def test_polar_dist_matches_disk_distance():
    rng = np.random.default_rng(3)
    for _ in range(200):
        r1, r2 = rng.uniform(0, 8, 2)
        f1, f2 = rng.uniform(0, 2 * math.pi, 2)
        d_disk = dist(polar_to_disk(PolarPoint(r1, f1)), polar_to_disk(PolarPoint(r2, f2)))
        assert float(polar_dist(r1, f1, r2, f2)) == pytest.approx(d_disk, abs=1e-9)


@given(disk_points(), disk_points())
def test_symmetry(p, q):
    assert dist(p, q) == pytest.approx(dist(q, p), abs=1e-12)


@given(disk_points(), disk_points(), disk_points())
def test_triangle_inequality(p, q, r):
    assert dist(p, r) <= dist(p, q) + dist(q, r) + 1e-9


@given(disk_points(), disk_points(), disk_points())
def test_gromov_product_nonnegative_and_bounded(x, y, w):
    g = gromov_product(x, y, w).value
    assert g >= 0.0
    assert g <= min(dist(x, w), dist(y, w)) + 1e-9


def test_ray_distance_closed_form_against_minimization():
    p = PolarPoint(2.0, 0.7)
    ts = np.linspace(0, 10, 200001)
    brute = float(np.min(polar_dist(2.0, 0.7, ts, 0.0)))
    assert dist_to_radial_ray(p, 0.0) == pytest.approx(brute, abs=1e-7)
    # beyond a right angle the origin is nearest
    assert dist_to_radial_ray(PolarPoint(2.0, 2.0), 0.0) == pytest.approx(2.0, abs=1e-12)
    assert dist_to_radial_ray(PolarPoint(1.5, 0.4), 0.4) == pytest.approx(0.0, abs=1e-12)


def test_arc_length_against_polyline():
    assert arc_length(2.2812, math.pi / 2) == pytest.approx(polyline_arc_length(2.2812, math.pi / 2), rel=1e-6)
    assert arc_length(2.2812, math.pi / 2) == pytest.approx(7.607, abs=1e-3)
    assert arc_length(0.0, 1.0) == 0.0


@settings(max_examples=50)
@given(disk_points(), disk_points(), st.floats(0.0, 1.0))
def test_geodesic_point_splits_distance(p, q, s):
    total = dist(p, q)
    m = geodesic_point(p, q, s * total)
    assert dist(p, m) == pytest.approx(s * total, abs=1e-7)
    assert dist(m, q) == pytest.approx((1 - s) * total, abs=1e-7)


@given(st.floats(0.0, 6.0), angle, st.floats(0.0, 4.0), angle)
def test_translate_polar_keeps_distance(cr, cphi, r, bearing):
    rho, phi = translate_polar(cr, cphi, r, bearing)
    assert float(polar_dist(cr, cphi, rho, phi)) == pytest.approx(r, abs=1e-7)
