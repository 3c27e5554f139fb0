import json
import os

import numpy as np
import pytest

from gsbdyn.cli import main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
FLAT_QUBIT = os.path.join(CONFIG_DIR, "flat_qubit.json")
LORENTZIAN_QUBIT = os.path.join(CONFIG_DIR, "lorentzian_qubit.json")


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse / config failures
        return int(exc.code)


def read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def test_solve_flat_matches_exponential(tmp_path):
    out = str(tmp_path)
    assert run(["solve", "--model", FLAT_QUBIT, "--T", "3", "--h", "0.05", "--out", out]) == 0
    lines = read(os.path.join(out, "survival.csv")).strip().splitlines()
    assert lines[0].startswith("#") and "closed_form_flat" in lines[0] and "gamma=1.0" in lines[0]
    assert lines[1] == "t,re_A_1_1,im_A_1_1"
    for row in lines[2:]:
        t, re, im = (float(x) for x in row.split(","))
        assert re**2 + im**2 == pytest.approx(np.exp(-t), abs=1e-12)


def test_missing_model_exits_config_code(tmp_path):
    code = run(["solve", "--model", str(tmp_path / "nope.json"), "--T", "1", "--h", "0.1",
                "--out", str(tmp_path)])
    assert code == 2


def test_step_too_coarse_exits_numeric_code(tmp_path):
    # gamma=8 Lorentzian with a step violating the stability guard
    code = run(["solve", "--model", LORENTZIAN_QUBIT, "--T", "1", "--h", "0.05",
                "--out", str(tmp_path)])
    assert code == 3


def test_reruns_byte_identical(tmp_path):
    args = ["--model", LORENTZIAN_QUBIT, "--T", "1", "--h", "0.01"]
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(["divisibility", *args, "--out", out1]) == 0
    assert run(["divisibility", *args, "--out", out2]) == 0
    for name in ("divisibility.json", "divisibility_timeseries.csv", "choi_scan.csv"):
        assert read(os.path.join(out1, name)) == read(os.path.join(out2, name))


def test_divisibility_report_underdamped(tmp_path):
    out = str(tmp_path)
    assert run(["divisibility", "--model", LORENTZIAN_QUBIT, "--T", "2", "--h", "0.005",
                "--out", out]) == 0
    report = json.loads(read(os.path.join(out, "divisibility.json")))
    assert report["cp_divisible"] is False and report["p_divisible"] is False
    assert report["semigroup"] is False
    assert 0.9 < report["first_violation_time"] < 1.0
    assert report["contraction_scan"]["worst_derivative"] > 0.01

    ts_lines = read(os.path.join(out, "divisibility_timeseries.csv")).strip().splitlines()
    assert ts_lines[0] == "t,opnorm,dnorm_dt,min_step_choi_eig"
    assert len(ts_lines) == 402

    scan_lines = read(os.path.join(out, "choi_scan.csv")).strip().splitlines()
    header = scan_lines[0].split(",")
    assert header[0] == "t" and header[-2:] == ["min_eig", "cp_flag"]
    # the reduced map itself stays CP at every time even when not divisible
    assert all(row.split(",")[-1] == "1" for row in scan_lines[1:])


def test_regression_sweep_gap_decreases(tmp_path):
    out = str(tmp_path)
    assert run(["regression", "--model", FLAT_QUBIT, "--times", "1,2", "--ops", "xbasis",
                "--sweep", "10,20", "--ratio", "10", "--h", "0.01", "--out", out]) == 0
    lines = read(os.path.join(out, "regression_sweep.csv")).strip().splitlines()
    assert lines[0] == "W,M,n_max,gap"
    gaps = [float(row.split(",")[-1]) for row in lines[1:]]
    assert len(gaps) == 2 and gaps[1] < gaps[0]
    report = json.loads(read(os.path.join(out, "regression.json")))
    assert report["gap_series"] == gaps
    assert report["rhs"]["re"] == pytest.approx(np.exp(-0.5), abs=1e-9)


def test_regression_single_point(tmp_path):
    out = str(tmp_path)
    assert run(["regression", "--model", FLAT_QUBIT, "--times", "1,2", "--W", "10",
                "--M", "100", "--h", "0.01", "--out", out]) == 0
    report = json.loads(read(os.path.join(out, "regression.json")))
    assert report["gap"] < 0.02
    assert report["metadata"]["W"] == 10.0


def test_bathscan_flat_sum_rule(tmp_path):
    out = str(tmp_path)
    assert run(["bathscan", "--model", FLAT_QUBIT, "--W", "20", "--M", "400",
                "--out", out]) == 0
    summary = json.loads(read(os.path.join(out, "bath.json")))
    channel = summary["channels"][0]
    assert channel["sum_g_sq"] == pytest.approx(20 / np.pi, rel=1e-12)
    assert channel["rel_error"] < 1e-12  # flat density: midpoint sum is exact
    rows = read(os.path.join(out, "bath.csv")).strip().splitlines()
    assert rows[0] == "channel,mode,omega,g"
    assert len(rows) == 401
    g = float(rows[1].split(",")[-1])
    assert g == pytest.approx(np.sqrt(0.1 / (2 * np.pi)), abs=1e-12)


def test_help_lists_units(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "--T" in text and "units of time" in text
    with pytest.raises(SystemExit):
        main(["regression", "--help"])
    text = capsys.readouterr().out
    assert "--W" in text and "1/time" in text


def test_validate_passes():
    assert main(["validate"]) == 0
