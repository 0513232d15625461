import csv
import json

import numpy as np
import pytest

from mtrl_lines import cli

FR4 = {"type": "constant", "eps_real": 2.6}


def _run(tmp_path, command, cfg, *extra, name="job"):
    p = tmp_path/f"{name}.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path/name
    rc = cli.run([command, "--config", str(p), "--out", str(out), *extra])
    return rc, out


def _summary(out):
    return json.loads((out/"summary.json").read_text())


def test_analyze(tmp_path, capsys):
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 0, "f_max_hz": 25e9, "points": 501},
           "lengths": {"values": [0, 1, 4, 6], "unit": "cm"}}
    rc, out = _run(tmp_path, "analyze", cfg)
    assert rc == 0
    printed = json.loads(capsys.readouterr().out)
    s = _summary(out)
    assert s["results"] == printed
    assert s["version"] and s["config"]["scaling"] == "none" and s["config"]["margin_deg"] == 30.0
    assert "elapsed_s" in s
    rows = list(csv.reader((out/"phase_curve.csv").open()))
    assert rows[0] == ["frequency_hz", "lambda", "kappa", "phi_deg", "degenerate_flag"]
    assert len(rows) == 502
    phi = np.array([float(r[3]) for r in rows[1:]])
    f = np.array([float(r[0]) for r in rows[1:]])
    band = (f >= 0.775e9) & (f <= 8.52e9)
    assert phi[band].min() >= 30 - 1e-9


def test_analyze_occurrence_scaling_matches(tmp_path):
    base = {"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 20e9, "points": 101}}
    a = dict(base, lengths={"values": [0, 10, 40, 60], "unit": "mm"})
    b = dict(base, lengths={"values": [0, 10, 40, 60, 60, 60], "unit": "mm"},
             scaling="occurrence")
    _, oa = _run(tmp_path, "analyze", a, name="a")
    _, ob = _run(tmp_path, "analyze", b, name="b")
    ka = np.loadtxt(oa/"phase_curve.csv", delimiter=",", skiprows=1)[:, 2]
    kb = np.loadtxt(ob/"phase_curve.csv", delimiter=",", skiprows=1)[:, 2]
    np.testing.assert_allclose(ka, kb, rtol=1e-12)


def test_units_are_equivalent(tmp_path):
    base = {"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 9e9, "points": 11}}
    outs = []
    for unit, scale in [("cm", 1), ("mm", 10), ("um", 1e4), ("µm", 1e4), ("m", 0.01)]:
        cfg = dict(base, lengths={"values": [0, 1*scale, 3*scale], "unit": unit})
        _, o = _run(tmp_path, "analyze", cfg, name=f"u{len(outs)}")
        outs.append(np.loadtxt(o/"phase_curve.csv", delimiter=",", skiprows=1))
    for o in outs[1:]:
        np.testing.assert_allclose(o, outs[0], rtol=1e-12)


def test_linecount(tmp_path):
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 3e9, "f_max_hz": 8.5215e9},
           "l_max": {"value": 6, "unit": "cm"}}
    rc, out = _run(tmp_path, "linecount", cfg)
    assert rc == 0
    r = json.loads((out/"linecount.json").read_text())
    assert (r["m_max"], r["m_min"], r["n_lines"]) == (6, 4, 4)
    assert r["lossless_closed_form"]


def test_trl_band(tmp_path):
    cfg = {"frequency": {"f_min_hz": 1e9, "f_max_hz": 8e9}, "eps_real": 2.6, "margin_deg": 20}
    rc, out = _run(tmp_path, "trl-band", cfg)
    r = json.loads((out/"trl_design.json").read_text())
    assert rc == 0 and r["band_index"] == 0
    assert r["achieved_margin_deg"] == pytest.approx(20.0, rel=1e-12)
    assert r["margin_shortfall_deg"] == 0.0
    assert _summary(out)["config"]["band_n"] == 0


def test_design_ruler(tmp_path):
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 8e9}, "n_lines": 4}
    rc, out = _run(tmp_path, "design-ruler", cfg)
    d = json.loads((out/"design.json").read_text())
    assert rc == 0 and d["marks"] == [0, 1, 4, 6] and d["margin_met"]
    assert (out/"phase_curve.csv").exists()


def test_design_optimize_and_byte_identical_reruns(tmp_path, capsys):
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 0.775e9, "f_max_hz": 8.52e9},
           "n_lines": 4, "l_max": {"value": 6, "unit": "cm"},
           "loss": {"kind": "minmax_mean"}, "optimizer": {"max_generations": 300}}
    rc1, o1 = _run(tmp_path, "design-optimize", cfg, "--seed", "7", name="r1")
    rc2, o2 = _run(tmp_path, "design-optimize", cfg, "--seed", "7", "--threads", "2", name="r2")
    assert rc1 == rc2 == 0
    for name in ("design.json", "phase_curve.csv", "history.csv"):
        assert (o1/name).read_bytes() == (o2/name).read_bytes()
    s1, s2 = _summary(o1), _summary(o2)
    s1.pop("elapsed_s"), s2.pop("elapsed_s")
    assert s1 == s2
    assert s1["config"]["seed"] == 7
    d = json.loads((o1/"design.json").read_text())
    assert d["n_lines"] == 4 and d["lengths_m"][0] == 0 and d["lengths_m"][-1] == 0.06
    hist = np.loadtxt(o1/"history.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(hist[:, 1]) <= 0)


def test_mc_sens(tmp_path):
    cfg = {"medium": {"type": "constant", "eps_real": 5.2},
           "frequency": {"f_min_hz": 1e9, "f_max_hz": 110e9, "points": 12},
           "lengths": {"values": [0, 0.25, 0.7, 1.6, 3.3, 5.05], "unit": "mm"},
           "mc": {"trials": 8}}
    rc, out = _run(tmp_path, "mc-sens", cfg, "--seed", "1")
    assert rc == 0
    rows = list(csv.reader((out/"mae.csv").open()))
    assert rows[0] == ["frequency_hz", "term_name", "mae", "excluded_trials"]
    assert len(rows) == 1 + 12*4
    inv = np.loadtxt(out/"inverse_lambda.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(inv[:, 2], 1/inv[:, 1], rtol=1e-15)
    rc, out2 = _run(tmp_path, "mc-sens", cfg, "--seed", "1", name="again")
    assert (out/"mae.csv").read_bytes() == (out2/"mae.csv").read_bytes()


def test_waveguide_medium(tmp_path):
    cfg = {"medium": {"type": "waveguide", "width": {"value": 864, "unit": "um"}},
           "frequency": {"f_min_hz": 220e9, "f_max_hz": 300e9}, "l_max": {"value": 5, "unit": "mm"}}
    rc, out = _run(tmp_path, "linecount", cfg)
    assert rc == 0
    assert not json.loads((out/"linecount.json").read_text())["lossless_closed_form"]


@pytest.mark.parametrize("cfg,command", [
    ({"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 2e9}}, "analyze"),
    ({"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 2e9},
      "lengths": {"values": [0, 1], "unit": "inch"}}, "analyze"),
    ({"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 2e9},
      "lengths": {"values": [0, 1], "unit": "mm"}, "colour": "red"}, "analyze"),
    ({"medium": FR4, "frequency": {"f_min_hz": 3e9, "f_max_hz": 2e9},
      "lengths": {"values": [0, 1], "unit": "mm"}}, "analyze"),
    ({"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 8e9}, "n_lines": 25}, "design-ruler"),
    ({"medium": {"type": "tabulated", "points": [{"frequency_hz": 1e9, "eps_real": 2},
                                                 {"frequency_hz": 2e9, "eps_real": 2}]},
      "frequency": {"f_min_hz": 1e9, "f_max_hz": 5e9},
      "lengths": {"values": [0, 1], "unit": "mm"}}, "analyze"),
])
def test_config_errors_exit_2(tmp_path, capsys, cfg, command):
    rc, _ = _run(tmp_path, command, cfg)
    assert rc == 2
    assert "mtrl-lines:" in capsys.readouterr().err


def test_missing_config_file_exit_2(tmp_path):
    assert cli.run(["analyze", "--config", str(tmp_path/"nope.json")]) == 2


def test_error_message_names_field(tmp_path, capsys):
    cfg = {"medium": {"type": "constant", "eps_real": -1}, "frequency": {"f_min_hz": 1, "f_max_hz": 2},
           "lengths": {"values": [0, 1], "unit": "mm"}}
    assert _run(tmp_path, "analyze", cfg)[0] == 2
    assert "medium" in capsys.readouterr().err


def test_infeasible_exit_3(tmp_path):
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 0.2e9, "f_max_hz": 8e9}, "n_lines": 3}
    assert _run(tmp_path, "design-ruler", cfg)[0] == 3
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 8e9}, "n_lines": 5,
           "l_max": {"value": 6, "unit": "cm"}, "l_min_gap": {"value": 2, "unit": "cm"}}
    assert _run(tmp_path, "design-optimize", cfg, name="gap")[0] == 3


def test_degenerate_exit_4(tmp_path):
    cfg = {"medium": FR4, "frequency": {"f_min_hz": 1e9, "f_max_hz": 5e9, "points": 3},
           "lengths": {"values": [2, 2], "unit": "mm"}, "mc": {"trials": 2, "noise_sigma": 0}}
    assert _run(tmp_path, "mc-sens", cfg)[0] == 4
