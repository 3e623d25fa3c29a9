import json
from importlib import resources

import jsonschema
import pytest

from combspace.cli import main, dumps
from combspace.comb import build, spec_from_json
from combspace.render import element_counts, render_svg


def schema(name):
    return json.loads(resources.files("combspace").joinpath(f"schemas/{name}.schema.json").read_text())


def test_build_is_canonical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["build", "--sectors", "3", "--hair", "2", "--out", str(a)]) == 0
    assert main(["build", "--sectors", "3", "--hair", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    jsonschema.validate(doc, schema("combspec"))
    assert spec_from_json(a.read_text()).to_json() == a.read_text()


def test_build_single_sector_spokes(tmp_path):
    out = tmp_path / "s.json"
    main(["build", "--sectors", "1", "--out", str(out)])
    assert len(json.loads(out.read_text())["spokes"]["angle"]) == 9


def test_depth_limit_exit_code(capsys):
    assert main(["build", "--sectors", "30"]) == 2
    assert "depth limit" in capsys.readouterr().err


def test_render_counts(tmp_path):
    out = tmp_path / "c.svg"
    assert main(["render", "--sectors", "4", "--out", str(out)]) == 0
    spec = build(4)
    counts = element_counts(out.read_text())
    assert counts == {"disk": 1, "sector": 4, "arc": 4, "spoke": len(spec.spokes)}


def test_render_zero_hair_and_determinism():
    spec = build(2, 0.0)
    svg = render_svg(spec)
    assert svg == render_svg(build(2, 0.0))
    assert element_counts(svg)["spoke"] == len(spec.spokes)


def test_dist_command(tmp_path):
    out = tmp_path / "d.json"
    p = '{"sector": 1, "rho": 1.0, "phi": 0.3}'
    q = '{"spoke": 20, "t": 8.0}'
    assert main(["dist", "--sectors", "3", "--p", p, "--q", q, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("dist"))
    assert doc["witness"]["length"] == pytest.approx(doc["value"], abs=1e-9)


def test_single_commands_validate(tmp_path):
    runs = {
        "visual": (["visual-check", "--samples", "500"], {"visual.json": "visual"}),
        "delta": (["delta", "--sectors", "3", "--samples", "300"], {"delta.json": "delta_estimate"}),
        "boundary": (["boundary", "--sectors", "3", "--count", "40", "--levels", "3"], {"boundary_covers.json": "boundary"}),
        "cover": (["cover", "--sectors", "2", "--scale-d", "1", "2"], {"cover.json": "cover"}),
        "lower": (["lower-bound", "--ball-sector", "3", "--ball-radius", "2", "--budget", "1000"], {"lower_bound.json": "lower_bound"}),
    }
    for name, (argv, files) in runs.items():
        out = tmp_path / name
        assert main(argv + ["--out", str(out)]) == 0, name
        for fname, sch in files.items():
            jsonschema.validate(json.loads((out / fname).read_text()), schema(sch))
        jsonschema.validate(json.loads((out / "manifest.json").read_text()), schema("manifest"))


def test_certify_all_quick_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["certify-all", "--profile", "quick", "--sectors", "4", "--out", str(a)]) == 0
    assert main(["certify-all", "--profile", "quick", "--sectors", "4", "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    jsonschema.validate(man, schema("manifest"))
    jsonschema.validate(json.loads((a / "qi_constants.json").read_text()), schema("qi_constants"))
    assert man["passed"] and all(man["certificates"].values())


def test_dumps_has_no_infinities():
    assert dumps({"x": float("inf")}) == '{\n "x": null\n}\n'
