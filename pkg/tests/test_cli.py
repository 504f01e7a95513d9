import json
import math

import pytest

from thinspec import acceptance, cli

PI = math.pi


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_expand_ellipse(capsys):
    code, out = run(capsys, "expand", "--model", "ellipsoid", "--a", "1,1")
    assert code == 0
    rep = json.loads(out)
    c = rep["expansion"]["coefficients"]
    assert c["c0"] == pytest.approx(PI ** 2 / 4) and c["c4"] == pytest.approx(0.75)
    assert rep["schema"] == 1


def test_expand_lemniscate(capsys, tmp_path):
    code, out = run(capsys, "expand", "--model", "lemniscate", "--out", str(tmp_path / "new"))
    assert code == 0
    rep = json.loads((tmp_path / "new" / "expand.json").read_text())
    assert rep["expansion"]["coefficients"]["c4"] == pytest.approx(97 / 24, rel=1e-6)
    assert json.loads(out) == rep


@pytest.mark.parametrize("argv", [
    ("expand", "--a", "1,-1"),
    ("expand", "--a", "1,x"),
    ("expand", "--model", "torus"),
    ("expand", "--model", "rectangle"),
    ("sweep", "--eps", "0.1", "--resolution", "100"),
    ("sweep", "--eps", "-0.1"),
])
def test_invalid_input_exit_code(capsys, argv):
    code, out = run(capsys, *argv)
    assert code == 2
    assert "code" in json.loads(out)["error"]


def test_spectrum_theta(capsys):
    code, out = run(capsys, "spectrum", "--theta", "1,1", "--count", "3")
    rep = json.loads(out)
    assert code == 0
    assert [lv["value"] for lv in rep["spectrum"]["levels"]] == [2.0, 4.0, 4.0]
    assert rep["groups"][1]["multiplicity"] == 2
    assert rep["splitting"]["T"] == [[0.0, 0.0], [0.0, 0.0]]


def test_spectrum_numeric(capsys):
    code, out = run(capsys, "spectrum", "--model", "ellipsoid", "--a", "1,1", "--count", "2", "--numeric")
    rep = json.loads(out)
    assert code == 0
    assert rep["numeric"]["values"] == pytest.approx([PI / 2, 3 * PI / 2], rel=1e-5)


def test_spectrum_bad_group(capsys):
    code, _ = run(capsys, "spectrum", "--theta", "1,2", "--count", "3", "--group", "7")
    assert code == 2


def test_sweep_outputs_and_determinism(capsys, tmp_path):
    args = ["sweep", "--model", "ellipsoid", "--a", "1,1", "--eps", "0.25,0.5,0.5", "--resolution", "32"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "eps,asym3,asym4,num,num_rich,diff3,diff4,order_fit,residual,seconds"
    # deduplicated, largest eps first, seconds left blank
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0.5", "0.25"]
    assert all(ln.endswith(",") for ln in lines[1:])
    timings = (tmp_path / "a" / "sweep_timings.csv").read_text().splitlines()
    assert timings[0] == "eps,seconds" and len(timings) == 3
    rep = json.loads((tmp_path / "a" / "sweep.json").read_text())
    assert rep["rows"][0]["asym4"] is not None


def test_sweep_rectangle_numeric_only(capsys, tmp_path):
    code = cli.main(["sweep", "--model", "rectangle", "--eps", "0.5", "--resolution", "32", "--out", str(tmp_path)])
    capsys.readouterr()
    assert code == 0
    rep = json.loads((tmp_path / "sweep.json").read_text())
    assert rep["expansion"] is None and rep["expansion_error"]["code"]
    assert rep["rows"][0]["num"] == pytest.approx(PI ** 2 * (1 + 4), rel=1e-2)


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# ellipse\nmodel = ellipsoid\na = 2, 1   # semi-axes\n")
    code, out = run(capsys, "expand", "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["model"]["params"]["a"] == [2.0, 1.0]
    # command line wins over the file
    code, out = run(capsys, "expand", "--config", str(cfg), "--a", "1,1")
    assert json.loads(out)["model"]["params"]["a"] == [1.0, 1.0]
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    code, _ = run(capsys, "expand", "--config", str(bad))
    assert code == 2


def test_validate_subset(capsys, tmp_path):
    code, out = run(capsys, "validate", "--only", "A1,A8", "--out", str(tmp_path / "v"))
    assert code == 0
    assert "A1 PASS" in out and "A8 PASS" in out and "2/2 criteria passed" in out
    rep = json.loads((tmp_path / "v" / "validate.json").read_text())
    assert [c["key"] for c in rep["criteria"]] == ["A1", "A8"]


def test_validate_detects_tampered_coefficient(capsys, monkeypatch):
    real = acceptance.first_eigenvalue_coeffs

    def tampered(jet):
        res = real(jet)
        object.__setattr__(res, "c2k2", res.c2k2 + 1e-6)
        return res

    monkeypatch.setattr(acceptance, "first_eigenvalue_coeffs", tampered)
    code, out = run(capsys, "validate", "--only", "A1")
    assert code == 1
    assert "A1 FAIL" in out


def test_validate_unknown_criterion(capsys):
    code, _ = run(capsys, "validate", "--only", "A9")
    assert code == 2
