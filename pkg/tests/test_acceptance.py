"""Acceptance criteria 1-8, one test each, each reporting a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from combspace.boundary import boundary_points, finite_product, product_at_infinity, BoundaryPoint, zero_dim_cover
from combspace.cli import certify_all
from combspace.comb import InSector, OnSpoke, build, plane_distance, sample_points, visual_check
from combspace.coverings import SectorBall, build_cover, build_net, decomposition_search, verify_decomposition
from combspace.hyperbolic import ray_distance
from combspace.hyperbolicity import estimate_delta, estimate_plane_delta
from combspace.pathmetric import PathMetric, metric_for
from combspace.render import element_counts, render_svg
from conftest import ACCEPTANCE_LINES
from oracles import brute_force_decomposable


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_1_construction():
    start = time.perf_counter()
    worst = 0.0
    ok = True
    for n in range(1, 9):
        spec = build(n, 10)
        for sec in spec.sectors:
            c = sec.center
            for ray in (sec.theta_lo, sec.theta_hi):
                ok &= float(ray_distance(c.rho, c.phi, ray)) >= sec.index - 1e-9
            ok &= abs(sec.truncation_radius - (c.rho + sec.index)) <= 1e-12
            ok &= 0.5 <= sec.piece_length <= 1.0
            err = abs(sec.theta_lo - math.pi * (1 - 2.0 ** (1 - sec.index)))
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok &= worst <= 1e-12 and elapsed < 1.0
    report(1, ok, f"n=1..8 invariants hold, max theta error {worst:.1e}, {elapsed:.2f}s")


def test_criterion_2_metric():
    start = time.perf_counter()
    spec = build(5, 10)
    m = metric_for(spec, 0.1)
    rng = np.random.default_rng(20)
    # same-piece pairs: both in one truncated sector, or both on one hair
    worst_exact = 0.0
    for i in range(1000):
        if i % 4 == 0:
            s = int(rng.integers(len(spec.spokes)))
            a = spec.spoke(s).attach_radius
            t = rng.uniform(a, spec.r_max, 2)
            got, want = m.dist(OnSpoke(s, t[0]), OnSpoke(s, t[1])), abs(t[0] - t[1])
        else:
            sec = spec.sector(int(rng.integers(1, 6)))
            r = rng.uniform(0, sec.truncation_radius, 2)
            f = rng.uniform(sec.theta_lo, sec.theta_hi, 2)
            p, q = InSector(sec.index, r[0], f[0]), InSector(sec.index, r[1], f[1])
            got, want = m.dist(p, q), plane_distance(spec, p, q)
        worst_exact = max(worst_exact, abs(got - want))
    a = sample_points(spec, rng, 1000)
    b = sample_points(spec, rng, 1000)
    dx = m.paired(a, b)
    plane = np.array([plane_distance(spec, a.point(i), b.point(i)) for i in range(1000)])
    below = float((plane - dx).max())
    coarse = metric_for(spec, 0.05).paired(a, b)
    fine = PathMetric(spec, 0.025).paired(a, b)
    rise = float((fine - coarse).max())
    change = float(np.abs(coarse - fine).max())
    elapsed = time.perf_counter() - start
    ok = worst_exact <= 1e-9 and below <= 1e-9 and rise <= 1e-9 and change <= 0.1 and elapsed < 120
    report(
        2, ok,
        f"same-piece error {worst_exact:.1e}, plane excess {below:.1e}, "
        f"refinement rise {rise:.1e} change {change:.4f}, {elapsed:.1f}s",
    )


def test_criterion_3_visuality():
    start = time.perf_counter()
    rep = visual_check(build(5, 10), np.random.default_rng(3), 10_000)
    elapsed = time.perf_counter() - start
    ok = rep.max_distance <= 1 + 1e-6 and elapsed < 60
    report(3, ok, f"max nearest-spoke distance {rep.max_distance:.6f} over 1e4 points, {elapsed:.1f}s")


def test_criterion_4_hyperbolicity():
    start = time.perf_counter()
    spec = build(5, 10)
    cap20 = estimate_delta(spec, 100_000, 20.0, 0.1, seed=4)
    cap10 = estimate_delta(spec, 100_000, 10.0, 0.1, seed=4)
    plane = estimate_plane_delta(100_000, 10.0, seed=4)
    elapsed = time.perf_counter() - start
    ok = (
        math.isfinite(cap20.delta_max)
        and cap20.delta_max <= cap10.delta_max + 1.0
        and plane.delta_max <= 1.0
        and elapsed < 600
    )
    report(
        4, ok,
        f"delta cap20 {cap20.delta_max:.4f}, cap10 {cap10.delta_max:.4f}, plane {plane.delta_max:.4f}, {elapsed:.1f}s",
    )


def test_criterion_5_boundary():
    start = time.perf_counter()
    spec = build(5, 10)
    m = metric_for(spec, 0.1)
    pts = boundary_points(spec, 200)
    ok = True
    meshes = []
    for k in range(1, 7):
        eps = 2.0**-k
        cov = zero_dim_cover(m, pts, eps)
        covered = sorted(s for c in cov.clusters for s in c) == list(range(200))
        ok &= covered and cov.mesh * math.exp(2 * m.epsilon) < eps and cov.min_gap > 0
        meshes.append(cov.mesh)
    worst = 0.0
    rng = np.random.default_rng(5)
    for _ in range(40):
        a, b = (int(x) for x in rng.choice(200, 2, replace=False))
        t = max(spec.spoke(a).attach_radius, spec.spoke(b).attach_radius) + 5 + rng.uniform(0, 3)
        inf_p = product_at_infinity(m, BoundaryPoint(a), BoundaryPoint(b))
        worst = max(worst, abs(finite_product(m, a, b, t, t + rng.uniform(0, 2)) - inf_p))
    elapsed = time.perf_counter() - start
    ok &= worst <= 2 * m.epsilon and elapsed < 300
    report(
        5, ok,
        f"covers at 2^-1..2^-6 certified (meshes {', '.join(f'{x:.3g}' for x in meshes)}), "
        f"finite-T product gap {worst:.1e}, {elapsed:.1f}s",
    )


def test_criterion_6_upper_cover():
    start = time.perf_counter()
    m = metric_for(build(3, 10), 0.1)
    certs = [build_cover(m, d) for d in (0.5, 1.0, 2.0)]
    elapsed = time.perf_counter() - start
    ok = all(c.multiplicity <= 3 and math.isfinite(c.mesh) for c in certs) and elapsed < 300
    detail = "; ".join(f"d={c.d}: mult {c.multiplicity}, mesh {c.mesh:.2f} ({c.probe_count} probes)" for c in certs)
    report(6, ok, f"{detail}, {elapsed:.1f}s")


def test_criterion_7_lower_bound():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    mismatches = 0
    counts = {"SAT": 0, "UNSAT": 0}
    for _ in range(50):
        n = int(rng.integers(4, 19))
        pts = rng.uniform(0, rng.uniform(2, 4), (n, 2))
        dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        d, D = float(rng.uniform(0.8, 2.0)), float(rng.uniform(0.5, 2.0))
        v = decomposition_search(dist, d, D)
        counts[v.verdict] += 1
        truth = brute_force_decomposable(dist, d, D)
        if (v.verdict == "SAT") != truth:
            mismatches += 1
        if v.verdict == "SAT" and not verify_decomposition(dist, v.families, v.blocks, d, D):
            mismatches += 1
    m = metric_for(build(5, 10), 0.1)
    net = build_net(m, SectorBall(4, 3.0), 1.0)
    big = decomposition_search(net, 2.0, 2.0, budget=10**7)
    witness_ok = big.verdict != "SAT" or verify_decomposition(net.dist, big.families, big.blocks, 2.0, 2.0)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and witness_ok and elapsed < 900
    report(
        7, ok,
        f"{mismatches} discrepancies on 50 instances ({counts['SAT']} SAT, {counts['UNSAT']} UNSAT); "
        f"B(center_4, 3) net of {len(net)} points: {big.verdict} after {big.nodes_explored} nodes, {elapsed:.1f}s",
    )


def test_criterion_8_reproducibility(tmp_path):
    spec = build(5, 10)
    a = certify_all(spec, 0, 0.1, "default", tmp_path / "a")
    b = certify_all(spec, 0, 0.1, "default", tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = names == sorted(p.name for p in (tmp_path / "b").iterdir()) and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names
    )
    spec4 = build(4)
    counts = element_counts(render_svg(spec4))
    want = {"disk": 1, "sector": spec4.n_sectors, "arc": spec4.n_sectors, "spoke": len(spec4.spokes)}
    ok = same and a == b and counts == want
    report(
        8, ok,
        f"certify-all bundles identical ({len(names)} files, all certificates "
        f"{'pass' if a['passed'] else 'not all pass'}); render build(4) counts {counts}",
    )
