import csv
import json
import subprocess
import sys
import time

import pytest

from qgv.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from qgv.config import ConfigError, parse_config


def write_config(tmp_path, body, name="run.ini"):
    p = tmp_path / name
    p.write_text(body)
    return str(p)


def scalar_config(tmp_path, kind="free_scalar", extra=""):
    return write_config(tmp_path, f"[theory]\nkind = {kind}\nmass = 1.0\n[run]\nseed = 1\nout = {tmp_path / 'out'}\n{extra}")


def lattice_config(tmp_path, extra=""):
    return write_config(tmp_path, f"""
[theory]
kind = lattice
group = U1
beta = 1.0   # strong coupling
dims = 8, 8
n_configs = 40
[run]
seed = 3
out = {tmp_path / 'out'}
{extra}""")


def test_free_scalar_check_passes(tmp_path, capsys):
    assert main(["check", "--config", scalar_config(tmp_path)]) == EXIT_OK
    reports = json.loads((tmp_path / "out" / "check.json").read_text())
    verdicts = {r["axiom"]: r["verdict"] for r in reports["reports"]}
    assert verdicts["reflection_positivity"] == "pass"
    assert set(verdicts.values()) <= {"pass", "inapplicable"}
    assert "config_hash" in reports["provenance"]
    assert "reflection_positivity" in capsys.readouterr().out


def test_sign_flipped_rp_exits_one(tmp_path):
    cfg = scalar_config(tmp_path, "sign_flipped")
    assert main(["check", "--config", cfg, "--axioms", "reflection_positivity"]) == EXIT_FAIL


def test_unknown_axiom_exits_two(tmp_path, capsys):
    assert main(["check", "--config", scalar_config(tmp_path), "--axioms", "frobnicate"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "frobnicate" in err and "reflection_positivity" in err


def test_missing_required_key_names_it(tmp_path, capsys):
    cfg = write_config(tmp_path, "[theory]\nkind = lattice\ngroup = U1\ndims = 8, 8\nn_configs = 10\n")
    assert main(["simulate", "--config", cfg]) == EXIT_USAGE
    assert "beta" in capsys.readouterr().err


@pytest.mark.parametrize("body", [
    "[theory]\nkind = free_scalar\ncolour = red\n",
    "[theory]\nkind = free_scalar\n[plots]\nx = 1\n",
    "[theory]\nkind = quark_soup\n",
    "[run]\nseed = 1\n",
])
def test_invalid_configs_exit_two(tmp_path, body):
    assert main(["check", "--config", write_config(tmp_path, body)]) == EXIT_USAGE


def test_empty_basis_exits_two(tmp_path):
    cfg = scalar_config(tmp_path, extra="[basis]\nn_tests = 0\n")
    assert main(["reconstruct", "--config", cfg]) == EXIT_USAGE


def test_usage_errors(tmp_path, monkeypatch):
    assert main([]) == EXIT_USAGE
    assert main(["check"]) == EXIT_USAGE
    assert main(["check", "--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE
    monkeypatch.setenv("QGV_THREADS", "many")
    assert main(["check", "--config", scalar_config(tmp_path)]) == EXIT_USAGE


def test_config_parser_details():
    cfg = parse_config("[theory]\nkind = lattice ; inline\ngroup = SU2\nbeta = 2\ndims = 4, 4\nn_configs = 5\n", "x")
    assert cfg.theory["dims"] == [4, 4]
    same = parse_config("[theory]\ngroup = SU2\nkind = lattice\nn_configs = 5\ndims = 4,4\nbeta = 2.0\n", "y")
    assert cfg.provenance_hash() == same.provenance_hash()
    with pytest.raises(ConfigError):
        parse_config("[theory]\nkind = lattice\ngroup = SU4\nbeta = 2\ndims = 4, 4\nn_configs = 5\n", "z")


def test_simulate_is_fast_and_reproducible(tmp_path, capsys):
    cfg = lattice_config(tmp_path)
    t0 = time.perf_counter()
    assert main(["simulate", "--config", cfg]) == EXIT_OK
    assert time.perf_counter() - t0 < 10
    first = capsys.readouterr().out.split("sha256")[-1].strip()
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "again")]) == EXIT_OK
    second = capsys.readouterr().out.split("sha256")[-1].strip()
    assert first == second and len(first) == 64
    assert main(["simulate", "--config", cfg, "--seed", "4", "--out", str(tmp_path / "other")]) == EXIT_OK
    assert capsys.readouterr().out.split("sha256")[-1].strip() != first


def test_lattice_measure_check_and_report(tmp_path):
    cfg = lattice_config(tmp_path, "[measure]\nobservables = plaq\nseparations = 1, 2, 3\n")
    assert main(["measure", "--config", cfg]) == EXIT_OK
    out = tmp_path / "out"
    with open(out / "correlator_plaq.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "yerr"] and len(rows) == 4
    assert main(["check", "--config", cfg, "--axioms", "reflection_positivity,gauge_covariance"]) == EXIT_OK
    assert main(["report", "--config", cfg]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert "check" in json.dumps(report)


def test_reconstruct_degree_two_gives_dimension_two(tmp_path):
    cfg = scalar_config(tmp_path, extra="[basis]\nn_tests = 1\ncap = 2\n")
    assert main(["reconstruct", "--config", cfg]) == EXIT_OK
    info = json.loads((tmp_path / "out" / "reconstruct.json").read_text())
    assert info["dim"] == 2 and info["null_dim"] == 0
    assert (tmp_path / "out" / "physical_space.npz").exists()


def test_continue_writes_single_pole_model(tmp_path, capsys):
    cfg = scalar_config(tmp_path)
    assert main(["continue", "--config", cfg, "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].startswith("x,y,yerr")
    model = json.loads((tmp_path / "out" / "spectral_model.json").read_text())["model"]
    assert len(model["poles"]) == 1
    assert model["poles"][0]["mu2"] == pytest.approx(1.0, abs=0.01)


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qgv.cli", "check", "--config", scalar_config(tmp_path),
                           "--axioms", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
