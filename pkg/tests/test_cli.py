import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from mcdtheory.cli import dumps, main
from mcdtheory.elliptical import elliptical_constants
from mcdtheory.models import get_radial


def schema(name):
    text = resources.files("mcdtheory").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def gauss_csv(tmp_path):
    path = tmp_path / "g.csv"
    np.savetxt(path, np.random.default_rng(4).standard_normal((400, 2)), delimiter=",")
    return path


def test_dumps_round_trips_floats():
    x = [0.1, 1 / 3, 1e-300, 2.0, np.float64(np.pi)]
    text = dumps({"x": x, "n": np.int64(3), "ok": np.bool_(True), "nan": float("nan")})
    back = json.loads(text)
    assert back["x"] == [float(v) for v in x] and back["n"] == 3 and back["ok"] is True
    assert back["nan"] is None and "2.0" in text


def test_estimate_four_points(tmp_path, capsys):
    path = tmp_path / "four.csv"
    path.write_text("0\n1\n2\n10\n")
    code, out, _ = run(capsys, "estimate", path, "--gamma", 0.75, "--exact")
    assert code == 0
    res = json.loads(out)
    jsonschema.validate(res, schema("estimate"))
    assert res["subset"] == [0, 1, 2] and res["C"] == [[2 / 3]] and res["method"] == "exact"


def test_estimate_deterministic_and_out_file(gauss_csv, tmp_path, capsys):
    outs = []
    for i in range(2):
        p = tmp_path / f"o{i}.json"
        assert run(capsys, "estimate", gauss_csv, "--seed", 11, "--out", p)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    jsonschema.validate(json.loads(outs[0]), schema("estimate"))


def test_estimate_errors(tmp_path, capsys):
    small = tmp_path / "small.csv"
    np.savetxt(small, np.ones((5, 2)), delimiter=",")
    code, _, err = run(capsys, "estimate", small)
    assert code == 1 and "4k" in err
    assert run(capsys, "estimate", tmp_path / "missing.csv")[0] == 2
    line = tmp_path / "line.csv"
    np.savetxt(line, np.column_stack([np.arange(10.0), np.arange(10.0)]), delimiter=",")
    assert run(capsys, "estimate", line, "--exact")[0] == 3
    big = tmp_path / "big.csv"
    np.savetxt(big, np.random.default_rng(0).standard_normal((80, 2)), delimiter=",")
    assert run(capsys, "estimate", big, "--exact")[0] == 4
    hdr = tmp_path / "hdr.csv"
    hdr.write_text("a,b\n" + "\n".join(f"{i},{i * i % 7}" for i in range(12)) + "\n")
    assert run(capsys, "estimate", hdr)[0] == 2  # header read as data is a malformed row
    assert run(capsys, "estimate", hdr, "--header")[0] == 0


def test_theory(capsys):
    code, out, _ = run(capsys, "theory", "--model", "gaussian", "--k", 2, "--gamma", 0.5)
    res = json.loads(out)
    jsonschema.validate(res, schema("theory"))
    assert res["r"] == pytest.approx(1.177410, abs=1e-6)
    assert res["alpha"] ** 2 == pytest.approx(0.306853, abs=1e-6)
    expected = ["model", "gamma", "k", "r", "alpha", "rho0", "nu0"] + [f"beta{i}" for i in range(1, 7)] \
        + ["pi"] + [f"kappa{i}" for i in range(1, 5)] + [f"lambda{i}" for i in range(1, 4)] \
        + ["tau", "sigma1", "sigma2", "sigma_rho_sq", "m2", "m4"]
    assert list(res) == expected
    code, out, _ = run(capsys, "theory", "--model", "student_t(5)", "--gamma", 0.75)
    res = json.loads(out)
    assert res["beta1"] < 0 and res["beta2"] < 0 and res["beta6"] > 0
    assert run(capsys, "theory", "--gamma", 1.0)[0] == 1
    assert run(capsys, "theory", "--model", "cosine")[0] == 5
    assert run(capsys, "theory", "--model", "uniform_ball")[0] == 6


def test_variance(gauss_csv, tmp_path, capsys):
    code, out, _ = run(capsys, "variance", gauss_csv, "--gamma", 0.75, "--restarts", 10)
    assert code == 0
    res = json.loads(out)
    jsonschema.validate(res, schema("variance"))
    assert res["keys"] == ["h1", "h2", "A11", "A12", "A22", "s"]
    assert np.array(res["covariance"]).shape == (6, 6) and res["density"] == "kde"
    code, out, _ = run(capsys, "variance", gauss_csv, "--gamma", 0.75, "--density", "gaussian")
    assert json.loads(out)["density"] == "gaussian"
    code, out, _ = run(capsys, "variance", gauss_csv, "--bandwidth", "0.4,0.5")
    jsonschema.validate(json.loads(out), schema("variance"))
    assert run(capsys, "variance", gauss_csv, "--bandwidth", "-1")[0] == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,4\n5,oops\n")
    code, _, err = run(capsys, "variance", bad)
    assert code == 2 and "line 3" in err


def test_variance_singular_exit(tmp_path, capsys):
    # a sample so tight that the kernel estimate vanishes on the fitted boundary
    path = tmp_path / "spiky.csv"
    X = np.random.default_rng(1).standard_normal((40, 2))
    np.savetxt(path, X, delimiter=",")
    code, _, _ = run(capsys, "variance", path, "--bandwidth", "1e-6")
    assert code == 6


def test_influence(capsys, caplog):
    c = elliptical_constants(get_radial("gaussian", 2), 0.5)
    code, out, err = run(capsys, "influence", "--gamma", 0.5, "--grid", f"0,{2 * c.r!r},3")
    lines = out.strip().splitlines()
    assert lines[0] == "norm,if_mu_norm,if_sigma_11,if_sigma_12,if_sigma_22,if_rho"
    assert len(lines) == 3  # the middle point equals r and is skipped
    assert "boundary" in caplog.text
    first = [float(v) for v in lines[1].split(",")]
    assert first[-1] == pytest.approx(c.lambda2 + c.lambda3, rel=1e-15)
    _, out, _ = run(capsys, "influence", "--grid", "2,4,5")
    rows = [line.split(",")[1:] for line in out.strip().splitlines()[1:]]
    assert all(r == rows[0] for r in rows)


def test_simulate(tmp_path, capsys):
    args = ["simulate", "--check", "clt", "--n", 200, "--reps", 8, "--restarts", 4, "--seed", 7]
    reps = tmp_path / "reps.csv"
    code, out1, _ = run(capsys, *args, "--dump-reps", reps)
    assert code == 0
    jsonschema.validate(json.loads(out1), schema("simulate"))
    assert reps.read_text().startswith("rep,muhat_1,muhat_2,sigmahat_11")
    _, out2, _ = run(capsys, *args)
    assert out1 == out2
    code, out, _ = run(capsys, "simulate", "--check", "expansion", "--ladder", "100,300",
                       "--reps", 4, "--restarts", 4)
    res = json.loads(out)
    jsonschema.validate(res, schema("simulate"))
    assert [r["n"] for r in res["statistics"]["rungs"]] == [100, 300]
    assert run(capsys, "simulate", "--gamma", 1.5)[0] == 1
    assert run(capsys, "simulate", "--n", 5)[0] == 1
    assert run(capsys, "simulate", "--model", "cosine", "--reps", 2)[0] == 5
    assert run(capsys, "simulate", "--check", "nope")[0] == 1
