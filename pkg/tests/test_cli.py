import csv
import json

import numpy as np
import pytest

from rearrange import fixtures as fx
from rearrange.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, main
from rearrange.grid_functions import read_gfn, write_gfn
from rearrange.height_interp import RadialProfile, read_rad, write_rad
from rearrange.thinfilm import explicit_solution


def manifest(path):
    return json.loads(open(str(path) + ".manifest.json").read())


def test_symmetrize(tmp_path):
    f = tmp_path / "f.gfn"
    g = tmp_path / "g.gfn"
    write_gfn(fx.two_bump(), f)
    assert main(["symmetrize", "--input", str(f), "--tau", "0.3", "--axis", "last", "--out", str(g)]) == EXIT_OK
    a, b = read_gfn(f), read_gfn(g)
    assert b.integral() == pytest.approx(a.integral(), rel=1e-3)
    doc = manifest(g)
    assert doc["passed"] and doc["parameters"]["tau"] == 0.3
    assert set(doc["versions"]) == {"rearrange", "numpy", "scipy", "python"}


def test_symmetrize_truncated_and_full(tmp_path):
    f = tmp_path / "f.gfn"
    write_gfn(fx.two_cones(65), f)
    assert main(["symmetrize", "--input", str(f), "--tau", "0.1", "--h0", "0.25", "--out", str(tmp_path / "t.gfn")]) == EXIT_OK
    assert manifest(tmp_path / "t.gfn")["truncation"]["clip_count"] >= 0
    assert main(["symmetrize", "--input", str(f), "--out", str(tmp_path / "s.gfn")]) == EXIT_OK
    assert main(["symmetrize", "--input", str(f), "--tau", "0.2", "--h0", "0.25", "--out", str(tmp_path / "x.gfn")]) == EXIT_CONFIG


def test_make_fixture(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["make-fixture", "triangle"]) == EXIT_OK
    tri = read_gfn(tmp_path / "triangle.gfn")
    np.testing.assert_allclose(tri.samples, np.maximum(0, 1 - np.abs(tri.axes[0].points)))
    assert main(["make-fixture", "two-cones", "--grid-n", "33"]) == EXIT_OK
    assert read_gfn(tmp_path / "two-cones.gfn").dim == 2
    assert main(["make-fixture", "stationary", "--s", "0.25", "--lambda", "1", "--format", "rad"]) == EXIT_OK
    v = read_rad(tmp_path / "stationary.rad")
    np.testing.assert_allclose(v.values, explicit_solution(1.0, 0.25).profile.values)
    assert main(["make-fixture", "stationary", "--s", "0.25", "--lambda", "1"]) == EXIT_OK
    assert main(["make-fixture", "two-bump", "--format", "profile"]) == EXIT_OK
    assert main(["make-fixture", "no-such-thing"]) == EXIT_CONFIG


def test_energy(tmp_path):
    f = tmp_path / "f.gfn"
    write_gfn(fx.triangle(1025), f)
    out = tmp_path / "e.json"
    for extra in (["--functional", "gagliardo"], ["--functional", "regularized", "--eps", "0.01"],
                  ["--functional", "local"], ["--functional", "thin-film", "--beta", "1"]):
        assert main(["energy", "--input", str(f), "--s", "0.3", *extra, "--out", str(out)]) == EXIT_OK
    assert main(["energy", "--input", str(f), "--functional", "thin-film"]) == EXIT_CONFIG
    assert main(["energy", "--input", str(f), "--s", "1.5"]) == EXIT_CONFIG
    assert main(["energy", "--input", str(tmp_path / "missing.gfn")]) == EXIT_CONFIG


def test_derivative(tmp_path):
    p = tmp_path / "p.json"
    assert main(["make-fixture", "asymmetric-peak", "--format", "profile", "--out", str(p)]) == EXIT_OK
    for kind in ("nonlocal", "local", "asymmetry"):
        out = tmp_path / f"{kind}.json"
        assert main(["derivative", "--input", str(p), "--kind", kind, "--out", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["value"] < 0


def test_interpolate(tmp_path):
    a, b = tmp_path / "a.rad", tmp_path / "b.rad"
    write_rad(fx.triangle_radial(), a)
    write_rad(fx.parabola_radial(), b)
    out = tmp_path / "curve.csv"
    argv = ["interpolate", "--f0", str(a), "--f1", str(b), "--functional", "hs", "--s", "0.3", "--t-steps", "21", "--out", str(out)]
    assert main(argv) == EXIT_OK
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 21
    assert all(float(r["second_difference"]) > 0 for r in rows[1:-1])
    assert main(["interpolate", "--f0", str(a), "--f1", str(b), "--functional", "lp", "--p", "1.5", "--out", str(out)]) == EXIT_OK
    c = tmp_path / "c.rad"
    write_rad(fx.cone_radial(), c)
    assert main(["interpolate", "--f0", str(a), "--f1", str(c), "--functional", "lp", "--out", str(out)]) == EXIT_CONFIG


def test_verify_stationary(tmp_path):
    assert main(["verify-stationary", "--s", "0.25", "--lambda", "1", "--out", str(tmp_path / "v.json")]) == EXIT_OK
    v = explicit_solution(1.0, 0.25).profile
    bump = 0.05 * np.exp(-(((v.r - 0.3) / 0.1) ** 2))
    bump[-1] = 0.0
    bad = tmp_path / "bad.rad"
    write_rad(RadialProfile(1, v.r, v.values + bump), bad)
    assert main(["verify-stationary", "--input", str(bad), "--s", "0.25", "--out", str(tmp_path / "b.json")]) == EXIT_CHECK
    assert not manifest(tmp_path / "b.json")["passed"]


def test_thread_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("REARRANGE_THREADS", "zero")
    assert main(["make-fixture", "triangle", "--out", str(tmp_path / "t.gfn")]) == EXIT_CONFIG
    monkeypatch.setenv("REARRANGE_THREADS", "2")
    assert main(["make-fixture", "triangle", "--out", str(tmp_path / "t.gfn")]) == EXIT_OK


def test_argument_errors():
    with pytest.raises(SystemExit) as exc:
        main(["symmetrize"])
    assert exc.value.code == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == EXIT_CONFIG


def test_suite_subset(tmp_path, capsys):
    assert main(["suite", "acceptance", "--seed", "3", "--only", "7,10", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert [c["id"] for c in doc["criteria"]] == [7, 10]
    assert doc["seed"] == 3 and "Philox" in doc["prng"]
    assert "criterion  7: PASS" in capsys.readouterr().out
