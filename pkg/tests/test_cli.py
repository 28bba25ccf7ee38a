import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from changepower.cli import main, read_series_csv
from changepower.power import CSV_COLUMNS, PowerTable

from conftest import FIXTURES


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_detect_moorea(capsys):
    code, out, _ = run(["detect", FIXTURES / "moorea.csv", "--perms", 999, "--seed", 1], capsys)
    assert code == 0
    assert "changepoints (4): 2007, 2014, 2016, 2019" in out
    p = float(out.split("p = ")[1].split()[0])
    assert p < 0.05


def test_detect_portal_with_bootstrap(tmp_path, capsys):
    out_csv = tmp_path / "cps.csv"
    code, out, _ = run(
        ["detect", FIXTURES / "portal.csv", "--perms", 999, "--boots", 1000, "--seed", 1,
         "--out", out_csv],
        capsys,
    )
    assert code == 0
    assert "changepoints (1): 1999" in out
    rows = out_csv.read_text().splitlines()
    assert rows[0] == "index,time,ci_lower,ci_upper,p_value"
    _, time_, lo, hi, p = rows[1].split(",")
    assert time_ == "1999" and float(lo) <= 1999 <= float(hi) and float(p) < 0.05


def test_detect_pelt_reports_penalty(capsys):
    code, out, _ = run(["detect", FIXTURES / "portal.csv", "--method", "pelt"], capsys)
    assert code == 0 and "penalty:" in out and "1999" in out


def test_detect_two_row_constant(tmp_path, capsys):
    f = tmp_path / "two.csv"
    f.write_text("time,value\n1,5\n2,5\n")
    code, out, _ = run(["detect", f], capsys)
    assert code == 0
    assert "changepoints (0): none" in out


def test_detect_malformed_reports_line(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("time,value\n1,5\n2,abc\n3,4\n")
    code, _, err = run(["detect", f], capsys)
    assert code == 2
    assert "line 3" in err


@pytest.mark.parametrize(
    "body",
    ["time,value\n", "time,value\n2,1\n1,2\n3,3\n", "time,value\n1,nan\n2,1\n", "x,y\n1,2\n2,3\n"],
)
def test_detect_rejects_bad_input(tmp_path, capsys, body):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    assert run(["detect", f], capsys)[0] == 2


def test_detect_missing_file(tmp_path, capsys):
    assert run(["detect", tmp_path / "nope.csv"], capsys)[0] == 2


def test_aggregate_mean(tmp_path):
    f = tmp_path / "sites.csv"
    f.write_text("time,value\n2000,1\n2000,3\n2001,5\n2001,7\n2002,0\n")
    ts = read_series_csv(f, "mean")
    assert list(ts.labels) == [2000, 2001, 2002]
    assert list(ts.values) == [2.0, 6.0, 0.0]


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("reps = 5\nbogus = 1\n")
    code, _, err = run(["power-grid", "--config", cfg, "--seed", 1, "--out", tmp_path / "g.csv"], capsys)
    assert code == 2 and "line 2" in err and "bogus" in err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("")
    target = blocker / "g.csv"
    code, _, _ = run(["simulate", "--n", 10, "--seed", 1, "--out", target], capsys)
    assert code == 3


def _smoke_cfg(tmp_path):
    cfg = tmp_path / "smoke.cfg"
    cfg.write_text("# smoke run\nreps = 10\nmaster_seed = 7\n")
    return cfg


def test_power_grid_outputs_and_speed(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    start = time.perf_counter()
    code, _, _ = run(["power-grid", "--config", _smoke_cfg(tmp_path), "--out", out], capsys)
    assert time.perf_counter() - start < 5.0
    assert code == 0
    table = PowerTable.from_csv(out.read_text())
    assert len(table) == 108
    assert out.read_text().splitlines()[0].split(",") == list(CSV_COLUMNS)
    for k in (1, 2, 3):
        svg = (tmp_path / f"grid_k{k}.svg").read_text()
        assert svg.startswith("<?xml") and svg.count("<rect") == 36
    assert (tmp_path / "grid_guidelines.csv").read_text().startswith("n,k1,k2,k3")


def test_power_grid_byte_identical(tmp_path, capsys):
    cfg = _smoke_cfg(tmp_path)
    texts = []
    for i, workers in enumerate((1, 1, 8)):
        out = tmp_path / f"g{i}.csv"
        assert run(["power-grid", "--config", cfg, "--workers", workers, "--out", out], capsys)[0] == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_omitted_seed_is_reported(tmp_path, capsys):
    code, _, err = run(["simulate", "--n", 12, "--k", 1, "--es", 2, "--out", tmp_path / "s.csv"], capsys)
    assert code == 0 and "seed" in err
    truth = json.loads((tmp_path / "s.truth.json").read_text())
    assert str(truth["master_seed"]) in err


def test_guidelines_command(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    run(["power-grid", "--config", _smoke_cfg(tmp_path), "--out", out], capsys)
    code, text, _ = run(["guidelines", out, "--threshold", 0], capsys)
    assert code == 0
    assert text.splitlines()[1] == "10,0.5,0.5,Not feasible"


def test_simulate_constant(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert run(["simulate", "--n", 8, "--k", 0, "--sigma", 0, "--seed", 3, "--out", out], capsys)[0] == 0
    values = [float(r.split(",")[1]) for r in out.read_text().splitlines()[1:]]
    assert values == [35.0] * 8


def test_simulate_sidecar(tmp_path, capsys):
    out = tmp_path / "s.csv"
    run(["simulate", "--n", 18, "--k", 2, "--es", 1, "--seed", 3, "--out", out], capsys)
    truth = json.loads((tmp_path / "s.truth.json").read_text())
    assert truth["breakpoints"] == [6, 12]
    assert len(truth["levels"]) == 3


def test_simulate_ramp_vs_step(tmp_path, capsys):
    series = {}
    for scenario in ("step", "internal_ramp"):
        out = tmp_path / f"{scenario}.csv"
        run(["simulate", "--n", 18, "--k", 1, "--es", 2, "--seed", 11, "--scenario", scenario,
             "--out", out], capsys)
        series[scenario] = np.array([float(r.split(",")[1]) for r in out.read_text().splitlines()[1:]])
    diff = np.flatnonzero(~np.isclose(series["step"], series["internal_ramp"], rtol=0, atol=1e-12))
    assert set(diff) <= {5, 6, 7, 8}
    assert len(diff) == 4


def test_simulate_invalid_spec(tmp_path, capsys):
    assert run(["simulate", "--n", 5, "--k", 3, "--seed", 1, "--out", tmp_path / "x.csv"], capsys)[0] == 2


def test_ews_study_command(tmp_path, capsys):
    out = tmp_path / "ews.csv"
    code, text, _ = run(["ews-study", "--reps", 20, "--seed", 5, "--out", out], capsys)
    assert code == 0 and "crossover (pooled)" in text
    assert len(out.read_text().splitlines()) == 1 + 6 * 3


def test_ar1_study_command(tmp_path, capsys):
    out = tmp_path / "ar1.csv"
    code, _, _ = run(["ar1-study", "--reps", 10, "--seed", 5, "--out", out], capsys)
    assert code == 0
    assert len(PowerTable.from_csv(out.read_text())) == 2 * 3 * 6


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run(
        [sys.executable, "-m", "changepower", "detect", str(FIXTURES / "portal.csv")],
        capture_output=True, text=True, env=env, timeout=120,
    )
    assert proc.returncode == 0 and "1999" in proc.stdout
