"""Command-line front end: ``combspace <command> [flags]``."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import (
    BoundaryPoint,
    CoverCertificateError,
    VisualMetricParams,
    finite_product,
    product_matrix,
    visual_distance,
    visual_distance_csv,
    zero_dim_cover,
)
from .comb import (
    CombSpec,
    DepthLimitError,
    InSector,
    OnSpoke,
    build,
    spec_from_json,
    spec_to_json,
    visual_check,
)
from .coverings import SectorBall, build_cover, build_net, decomposition_search, verify_decomposition
from .hyperbolicity import estimate_delta, estimate_plane_delta, histogram_csv
from .pathmetric import metric_for, qi_constants
from .render import render_svg

PROFILES = {
    "quick": {
        "visual_samples": 1000,
        "delta_samples": 2000,
        "plane_samples": 2000,
        "boundary_spokes": 50,
        "boundary_levels": 4,
        "cover_scales": [1.0, 2.0],
        "lower_budget": 100_000,
        "qi_samples": 200,
    },
    "default": {
        "visual_samples": 10_000,
        "delta_samples": 100_000,
        "plane_samples": 100_000,
        "boundary_spokes": 200,
        "boundary_levels": 6,
        "cover_scales": [0.5, 1.0, 2.0],
        "lower_budget": 10_000_000,
        "qi_samples": 1000,
    },
}

COVER_SECTORS = 3


# --------------------------------------------------------------------------
# serialization helpers


def _clean(obj):
    """Make a value JSON-safe: numpy scalars to Python, infinities to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def point_to_dict(p) -> dict:
    if isinstance(p, InSector):
        return {"sector": p.sector, "rho": p.rho, "phi": p.phi}
    return {"spoke": p.spoke, "t": p.t}


def point_from_dict(doc: dict):
    if "spoke" in doc:
        return OnSpoke(int(doc["spoke"]), float(doc["t"]))
    return InSector(int(doc["sector"]), float(doc["rho"]), float(doc["phi"]))


def sha256(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


class Bundle:
    """Collects output files and writes them with a manifest."""

    def __init__(self, out: Path | None):
        self.out = out
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def write(self, manifest: dict) -> None:
        manifest["outputs"] = [
            {"path": name, "sha256": sha256(text)} for name, text in sorted(self.files.items())
        ]
        self.files["manifest.json"] = dumps(manifest)
        if self.out is None:
            sys.stdout.write(self.files["manifest.json"])
            return
        self.out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (self.out / name).write_text(text)


def manifest(command: str, params: dict, seed: int | None, spec: CombSpec | None) -> dict:
    return {
        "command": command,
        "parameters": params,
        "seed": seed,
        "spec_hash": spec.digest if spec is not None else None,
        "version": __version__,
    }


# --------------------------------------------------------------------------
# suites, shared by the single commands and certify-all


def suite_visual(spec, rng, samples) -> dict:
    return visual_check(spec, rng, samples).to_dict()


def suite_delta(spec, seed, samples, radius_cap, epsilon) -> tuple[dict, str]:
    est = estimate_delta(spec, samples, radius_cap, epsilon, seed)
    return est.to_dict(), histogram_csv(est)


def suite_boundary(spec, epsilon, count, levels, a) -> tuple[dict, str]:
    metric = metric_for(spec, epsilon)
    params = VisualMetricParams(a=a)
    pts = list(range(min(count, len(spec.spokes))))
    vis = visual_distance(params, product_matrix(metric, pts))
    covers = []
    passed = True
    for k in range(1, levels + 1):
        eps_mesh = 2.0 ** -k
        try:
            cov = zero_dim_cover(metric, [BoundaryPoint(i) for i in pts], eps_mesh, params)
            ok = cov.mesh * math.exp(2.0 * epsilon) < eps_mesh and cov.min_gap > 0.0
            doc = {"eps_mesh": eps_mesh, "passed": ok, **cov.to_dict()}
        except CoverCertificateError as err:
            ok = False
            doc = {"eps_mesh": eps_mesh, "passed": False, "error": str(err)}
        passed = passed and ok
        covers.append(doc)
    # hair-exit products against finite Gromov products on a few spoke pairs
    checks = []
    for a_, b_ in [(0, 1), (0, len(pts) - 1), (len(pts) // 2, len(pts) // 2 + 1)]:
        if a_ == b_ or b_ >= len(pts):
            continue
        t = float(max(spec.spokes.attach_radius[a_], spec.spokes.attach_radius[b_])) + 5.0
        t = min(t, spec.r_max)
        inf_p = float(product_matrix(metric, [a_, b_])[0, 1])
        fin = finite_product(metric, a_, b_, t, t)
        ok = abs(inf_p - fin) <= 2.0 * epsilon
        passed = passed and ok
        checks.append({"spokes": [a_, b_], "t": t, "at_infinity": inf_p, "finite": fin, "passed": ok})
    doc = {
        "spoke_count": len(pts),
        "visual_a": a,
        "epsilon": epsilon,
        "covers": covers,
        "stabilization": checks,
        "passed": passed,
    }
    return doc, visual_distance_csv(pts, vis)


def suite_cover(spec, epsilon, scales) -> dict:
    metric = metric_for(spec, epsilon)
    certs = [build_cover(metric, d).to_dict() for d in scales]
    return {
        "spec_hash": spec.digest,
        "n_sectors": spec.n_sectors,
        "epsilon": epsilon,
        "certificates": certs,
        "passed": all(c["passed"] and math.isfinite(c["mesh"]) for c in certs),
    }


def suite_lower_bound(spec, epsilon, sector, radius, net_scale, d, D, budget) -> dict:
    metric = metric_for(spec, epsilon)
    net = build_net(metric, SectorBall(sector, radius), net_scale)
    verdict = decomposition_search(net, d, D, budget)
    doc = verdict.to_dict()
    witness_ok = None
    if verdict.verdict == "SAT":
        witness_ok = verify_decomposition(net.dist, verdict.families, verdict.blocks, d, D)
    doc.update(
        {
            "region": {"sector": sector, "radius": radius},
            "net_scale": net_scale,
            "net_size": len(net),
            "net_covering_radius": net.covering_radius,
            "net_min_separation": net.min_separation,
            "net_points": [point_to_dict(p) for p in net.points.points()],
            "budget": budget,
            "witness_verified": witness_ok,
            "passed": witness_ok is not False,
        }
    )
    return doc


def suite_qi(spec, epsilon, seed, samples) -> dict:
    qi = qi_constants(metric_for(spec, epsilon), samples, seed)
    return {
        "multiplicative": qi.multiplicative,
        "additive": qi.additive,
        "sample_count": qi.sample_count,
        "seed": qi.seed,
        "max_ratio": qi.max_ratio,
    }


# --------------------------------------------------------------------------
# commands


def _spec(args) -> CombSpec:
    if getattr(args, "spec", None):
        return spec_from_json(Path(args.spec).read_text())
    return build(args.sectors, args.hair)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_build(args) -> int:
    _emit(args, spec_to_json(build(args.sectors, args.hair)))
    return 0


def cmd_render(args) -> int:
    _emit(args, render_svg(_spec(args)))
    return 0


def cmd_dist(args) -> int:
    spec = _spec(args)
    p = point_from_dict(json.loads(args.p))
    q = point_from_dict(json.loads(args.q))
    value, witness = metric_for(spec, args.epsilon).dist_with_witness(p, q)
    doc = {
        "value": value,
        "epsilon": args.epsilon,
        "witness": {"length": witness.length, "polyline": [point_to_dict(x) for x in witness.polyline]},
    }
    _emit(args, dumps(doc))
    return 0


def _bundle(args) -> Bundle:
    return Bundle(Path(args.out) if args.out else None)


def cmd_delta(args) -> int:
    spec = _spec(args)
    doc, csv = suite_delta(spec, args.seed, args.samples, args.radius_cap, args.epsilon)
    doc["passed"] = math.isfinite(doc["delta_max"])
    b = _bundle(args)
    b.add("delta.json", dumps(doc))
    b.add("delta_histogram.csv", csv)
    b.write(manifest("delta", _params(args), args.seed, spec) | {"passed": doc["passed"]})
    return 0 if doc["passed"] else 1


def cmd_visual(args) -> int:
    spec = _spec(args)
    doc = suite_visual(spec, np.random.default_rng(args.seed), args.samples)
    b = _bundle(args)
    b.add("visual.json", dumps(doc))
    b.write(manifest("visual-check", _params(args), args.seed, spec) | {"passed": doc["passed"]})
    return 0 if doc["passed"] else 1


def cmd_boundary(args) -> int:
    spec = _spec(args)
    doc, csv = suite_boundary(spec, args.epsilon, args.count, args.levels, args.visual_a)
    b = _bundle(args)
    b.add("boundary_covers.json", dumps(doc))
    b.add("visual_distance.csv", csv)
    b.write(manifest("boundary", _params(args), None, spec) | {"passed": doc["passed"]})
    return 0 if doc["passed"] else 1


def cmd_cover(args) -> int:
    spec = _spec(args)
    doc = suite_cover(spec, args.epsilon, args.scale_d)
    b = _bundle(args)
    b.add("cover.json", dumps(doc))
    b.write(manifest("cover", _params(args), None, spec) | {"passed": doc["passed"]})
    return 0 if doc["passed"] else 1


def cmd_lower_bound(args) -> int:
    spec = _spec(args)
    doc = suite_lower_bound(
        spec, args.epsilon, args.ball_sector, args.ball_radius, args.net_scale,
        args.scale_d, args.diam_D, args.budget,
    )
    b = _bundle(args)
    b.add("lower_bound.json", dumps(doc))
    b.write(manifest("lower-bound", _params(args), None, spec) | {"passed": doc["passed"]})
    return 0 if doc["passed"] else 1


def certify_all(spec: CombSpec, seed: int, epsilon: float, profile: str, out: Path | None) -> dict:
    """Run every suite on ``spec`` and write the bundle; returns the manifest."""
    cfg = PROFILES[profile]
    rng = np.random.default_rng(seed)
    # one child seed per suite, drawn in a fixed order from the root generator
    seeds = {k: int(rng.integers(2**31)) for k in ("visual", "delta", "qi")}
    b = Bundle(out)
    passed = {}

    visual = suite_visual(spec, np.random.default_rng(seeds["visual"]), cfg["visual_samples"])
    b.add("visual.json", dumps(visual))
    passed["visuality"] = visual["passed"]

    delta, csv = suite_delta(spec, seeds["delta"], cfg["delta_samples"], 20.0, epsilon)
    plane = estimate_plane_delta(cfg["plane_samples"], 10.0, seeds["delta"]).to_dict()
    delta_doc = {"comb": delta, "plane_control": plane,
                 "passed": math.isfinite(delta["delta_max"]) and plane["delta_max"] <= 1.0}
    b.add("delta.json", dumps(delta_doc))
    b.add("delta_histogram.csv", csv)
    passed["hyperbolicity"] = delta_doc["passed"]

    bdoc, bcsv = suite_boundary(spec, epsilon, cfg["boundary_spokes"], cfg["boundary_levels"], math.e)
    b.add("boundary_covers.json", dumps(bdoc))
    b.add("visual_distance.csv", bcsv)
    passed["boundary"] = bdoc["passed"]

    cover_spec = build(min(COVER_SECTORS, spec.n_sectors), spec.hair_extension)
    cdoc = suite_cover(cover_spec, epsilon, cfg["cover_scales"])
    b.add("cover.json", dumps(cdoc))
    passed["cover"] = cdoc["passed"]

    sector = min(4, spec.n_sectors)
    ldoc = suite_lower_bound(spec, epsilon, sector, min(3.0, float(sector)), 1.0, 2.0, 2.0, cfg["lower_budget"])
    b.add("lower_bound.json", dumps(ldoc))
    passed["lower_bound"] = ldoc["passed"]

    qi = suite_qi(spec, epsilon, seeds["qi"], cfg["qi_samples"])
    b.add("qi_constants.json", dumps(qi))

    doc = manifest("certify-all", {"epsilon": epsilon, "profile": profile, "suite_seeds": seeds}, seed, spec)
    doc["certificates"] = passed
    doc["passed"] = all(passed.values())
    b.write(doc)
    return doc


def cmd_certify_all(args) -> int:
    spec = _spec(args)
    doc = certify_all(spec, args.seed, args.epsilon, args.profile, Path(args.out) if args.out else None)
    return 0 if doc["passed"] else 1


def _params(args) -> dict:
    skip = {"func", "command", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="combspace", description="Comb space certificates.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--sectors", type=int, default=5)
        p.add_argument("--hair", type=float, default=10.0, help="hair length beyond the last N_n")
        p.add_argument("--spec", help="read a CombSpec JSON instead of building one")
        p.add_argument("--out", help="output file or directory (stdout when omitted)")
        return p

    add("build", cmd_build, "write the canonical CombSpec JSON")
    add("render", cmd_render, "draw the comb as SVG")
    p = add("dist", cmd_dist, "path distance with witness polyline")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--p", required=True, help='point as JSON, e.g. {"sector":1,"rho":1,"phi":0.5}')
    p.add_argument("--q", required=True, help='point as JSON, e.g. {"spoke":3,"t":4}')
    p = add("delta", cmd_delta, "four-point hyperbolicity estimate")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--radius-cap", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p = add("visual-check", cmd_visual, "nearest-spoke distances of random points")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p = add("boundary", cmd_boundary, "visual metric and zero-dimensional covers")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--visual-a", type=float, default=math.e)
    p = add("cover", cmd_cover, "constructive cover with multiplicity certificate")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--scale-d", type=float, nargs="+", default=[1.0])
    p = add("lower-bound", cmd_lower_bound, "two-family decomposition search on a ball net")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--scale-d", type=float, default=2.0)
    p.add_argument("--diam-D", type=float, default=2.0)
    p.add_argument("--budget", type=int, default=10_000_000)
    p.add_argument("--ball-sector", type=int, default=4)
    p.add_argument("--ball-radius", type=float, default=3.0)
    p.add_argument("--net-scale", type=float, default=1.0)
    p = add("certify-all", cmd_certify_all, "run every suite into one bundle")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=sorted(PROFILES), default="default")
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.func(args)
    except DepthLimitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
