import json
import math

import numpy as np
import pytest

from nullsupport.cli import EXIT_CONFIG, EXIT_OK, main, parse_grid


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    meta = dict(line[2:].split(": ", 1) for line in lines if line.startswith("# "))
    body = [line for line in lines if not line.startswith("#")]
    header = body[0].split(",")
    rows = np.array([[float(v) for v in line.split(",")] for line in body[1:]])
    return meta, header, rows


def run(*argv):
    return main([str(a) for a in argv])


def test_parse_grid():
    assert np.allclose(parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(parse_grid("1:100:log3"), [1, 10, 100])


def test_family_sample_row_count(tmp_path):
    out = tmp_path / "g.csv"
    assert run("--out", out, "family", "sample", "--kind", "glide", "--lambda", 1,
               "--t", "0.01:12:log200", "--s", "-20:20:200") == EXIT_OK
    meta, header, rows = read_csv(out)
    assert header == ["t", "s", "x", "y", "z"] and rows.shape == (40000, 5)
    assert meta["seed"] == "0" and "bias" in meta


def test_semitrough_matches_glide_at_zero(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    grid = ("--t", "0.05:5:log30", "--s", "-3:3:31")
    assert run("--out", a, "family", "sample", "--kind", "semitrough", *grid) == EXIT_OK
    assert run("--out", b, "family", "sample", "--kind", "glide", "--lambda", 0, *grid) == EXIT_OK
    ra, rb = read_csv(a)[2], read_csv(b)[2]
    assert ra.shape == rb.shape and np.max(np.abs(ra - rb)) <= 1e-12


def test_hyperboloid_sample_heights(tmp_path):
    out = tmp_path / "h.csv"
    assert run("--out", out, "family", "sample", "--kind", "hyperboloid") == EXIT_OK
    _, _, rows = read_csv(out)
    x, y, z = rows[:, 2:].T
    assert np.allclose(z, np.sqrt(1 + x * x + y * y), rtol=1e-14)


def test_support_dod_cone(tmp_path):
    out = tmp_path / "d.csv"
    assert run("--out", out, "support", "dod", "--phi", "constant:0", "--grid", "-5:5:101") == EXIT_OK
    meta, header, rows = read_csv(out)
    r = np.hypot(rows[:, 0], rows[:, 1])
    assert header == ["x", "y", "height"] and len(rows) == 101 * 101
    assert np.all(rows[:, 2] <= r + 1e-12) and np.max(r - rows[:, 2]) < 1e-3
    assert "lower bound" in meta["bias"]


def test_support_convert_hyperboloid(tmp_path):
    out = tmp_path / "c.csv"
    assert run("--out", out, "support", "convert", "--from", "parabolic", "--u", "hyperboloid") == EXIT_OK
    meta, header, rows = read_csv(out)
    off = np.abs(np.abs(rows[:, 0]) - math.pi) > 1e-9
    assert np.all(rows[off, 2] == 0) and np.allclose(rows[off, 1], 0, atol=1e-12)
    assert abs(float(meta["value_at_infinity"])) < 1e-6


def test_support_convert_round_trip(tmp_path):
    x0, th, x1 = (tmp_path / n for n in ("x0.csv", "th.csv", "x1.csv"))
    assert run("--out", x0, "support", "convert", "--phi", "glide:1", "--chart", "xi",
               "--x", "-4:4:41") == EXIT_OK
    assert run("--out", th, "support", "convert", "--input", x0, "--chart", "xi") == EXIT_OK
    assert run("--out", x1, "support", "convert", "--input", th, "--chart", "xi") == EXIT_OK
    a, b = read_csv(x0)[2], read_csv(x1)[2]
    assert a.shape == b.shape and np.max(np.abs(a - b)) <= 1e-12


def test_support_from_samples_is_lower_bound(tmp_path):
    pts, out = tmp_path / "p.csv", tmp_path / "s.csv"
    assert run("--out", pts, "family", "sample", "--kind", "hyperboloid", "--x", "-20:20:81",
               "--y", "-20:20:81") == EXIT_OK
    # drop the parameter columns: from-samples reads x, y, z
    meta, header, rows = read_csv(pts)
    np.savetxt(pts, rows[:, 2:], delimiter=",", header="x,y,z", comments="")
    assert run("--out", out, "support", "from-samples", "--input", pts) == EXIT_OK
    _, _, sup = read_csv(out)
    assert np.all(sup[:, 1] <= 1e-12) and np.all(sup[:, 1] > -0.05)


def test_curvature_grid(tmp_path):
    out = tmp_path / "k.csv"
    assert run("--out", out, "curvature", "grid", "--family", "glide", "--lambda", 2) == EXIT_OK
    _, header, rows = read_csv(out)
    assert header[2] == "K" and np.max(np.abs(rows[:, 2] + 1)) <= 1e-6


def test_geodesic_preset(tmp_path):
    out = tmp_path / "ray.csv"
    assert run("--out", out, "geodesic", "trace", "--family", "glide", "--lambda", 1,
               "--preset", "incomplete-ray", "--stride", 10) == EXIT_OK
    meta, header, rows = read_csv(out)
    assert meta["termination"] == "length_converged"
    assert abs(float(meta["theta_plus"]) + math.pi / 2) < 1e-2
    assert abs(float(meta["support_limit"])) < 1e-3
    assert float(meta["reference_curve_tail_length"]) == pytest.approx(
        math.sqrt(2) * math.log(1 / math.tanh(0.5)), abs=1e-9)
    assert math.isfinite(float(meta["total_length"]))
    assert rows[-1, -1] <= float(meta["total_length"])


def test_criteria_inc_prime(tmp_path):
    out = tmp_path / "v.json"
    assert run("--out", out, "criteria", "check", "--condition", "inc-prime", "--phi", "glide:1",
               "--theta0", -1.5707963) == EXIT_OK
    v = json.loads(out.read_text())
    assert v["holds"] and v["witness"]["radius"] > 0 and v["theta0_snapped_to_atom"]
    assert v["condition"] == "IncPrime" and v["seed"] == 0


def test_criteria_infinite_base_is_reported(tmp_path, capsys):
    assert run("criteria", "check", "--condition", "comp", "--phi", "glide:1", "--theta0", 0.0) == EXIT_CONFIG
    assert "InfiniteBase" in capsys.readouterr().err


def test_verify_only_curvature(tmp_path):
    out = tmp_path / "r.json"
    assert run("--out", out, "verify", "all", "--only", "curvature") == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["passed"] and {c["group"] for c in rep["criteria"]} == {"curvature"}
    for c in rep["criteria"]:
        assert {"measured", "tolerance", "runtime"} <= set(c)


def test_invalid_barrier_rejected_before_running(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"barrier": {"alpha": 0.5, "gamma": 0.6}}))
    assert run("--config", cfg, "verify", "all") == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "barrier" in err and "criterion" not in err
    assert run("family", "sample", "--kind", "barrier", "--alpha", 0.5, "--gamma", 0.5) == EXIT_CONFIG


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "seed": 1,\n  oops\n}')
    assert run("--config", bad, "family", "sample", "--kind", "hyperboloid") == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"colour": 1}')
    assert run("--config", unknown, "family", "sample", "--kind", "hyperboloid") == EXIT_CONFIG
    assert run("family", "sample", "--kind", "glide", "--t", "0:1:3") == EXIT_CONFIG
    assert run("geodesic", "trace", "--kind", "hyperboloid", "--u0", "0,0", "--w0", "1,0",
               "--step", 0) == EXIT_CONFIG
    assert run("support", "dod", "--grid", "1:2") == EXIT_CONFIG


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 7, "kind": "glide", "lambda": 0.5}))
    out = tmp_path / "o.csv"
    assert run("--config", cfg, "--out", out, "family", "sample", "--t", "0.5:1:2", "--s", "0:1:2") == EXIT_OK
    meta = read_csv(out)[0]
    assert meta["seed"] == "7" and json.loads(meta["params"])["lambda"] == 0.5
    assert run("--config", cfg, "--seed", 3, "--out", out, "family", "sample", "--lambda", 2,
               "--t", "0.5:1:2", "--s", "0:1:2") == EXIT_OK
    meta = read_csv(out)[0]
    assert meta["seed"] == "3" and json.loads(meta["params"])["lambda"] == 2.0


def test_outputs_are_deterministic(tmp_path, monkeypatch):
    paths = []
    for threads in ("1", "4"):
        monkeypatch.setenv("LSK_THREADS", threads)
        out = tmp_path / f"k{threads}.csv"
        assert run("--seed", 5, "--out", out, "curvature", "grid", "--family", "parabolic",
                   "--eps", 0.5) == EXIT_OK
        paths.append(out)
    assert paths[0].read_bytes().replace(b"k1.csv", b"") == paths[1].read_bytes().replace(b"k4.csv", b"")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run("--out", p, "criteria", "check", "--condition", "comp", "--phi", "semitrough",
                   "--theta0", 1.5707963267948966) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
