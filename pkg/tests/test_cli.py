"""CLI: config parsing, commands, exit codes, deterministic outputs."""

import json
from pathlib import Path

import pytest

from kamact.cli import RunConfig, main, parse_config


def run_cli(tmp_path, *args):
    return main([str(a) for a in args] + ["--out", str(tmp_path)])


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


BASE_CFG = """
# identity-base germ, order 32
a.coeffs = 0,1
trunc = 32
s = 0.9
delta = 0.5
f = 0.5
seed = 42
"""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_parse_config_defaults_and_keys():
    cfg = parse_config("a.coeffs = 0,1,0.3\ntrunc = 16\ndelta.grid = 0.2,0.3\n")
    assert cfg.a_coeffs == (0, 1, 0.3)
    assert cfg.trunc == 16
    assert cfg.delta_grid == (0.2, 0.3)
    assert cfg.command == "run"


def test_parse_config_comments_and_blank_lines():
    cfg = parse_config("# comment\n\nseed = 7  # trailing\n")
    assert cfg.seed == 7


def test_parse_config_unknown_key():
    with pytest.raises(ValueError, match="unknown key"):
        parse_config("bogus = 3\n")


def test_parse_config_rejects_bad_geometry():
    with pytest.raises(ValueError):
        parse_config("s = 0.5\ndelta = 0.7\n")


def test_parse_config_complex_base_point():
    cfg = parse_config("a.coeffs = 0, 1, 0.1+0.2j\n")
    assert cfg.a_coeffs[2] == 0.1 + 0.2j


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def test_cmd_run_converges(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_CFG)
    code = run_cli(tmp_path, "--config", cfg)
    assert code == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["status"] == "Converged"
    trace = (tmp_path / "trace.csv").read_text()
    assert trace.splitlines()[0] == ("n,s_n,sigma_n,xi_norm,lemma1_bound,mu_n,"
                                     "gamma_norm,g_n,x_norm,cauchy_inc,lemma3_bound")
    doc = json.loads((tmp_path / "result.json").read_text())
    assert doc["status"] == "Converged"
    assert doc["residual"] <= 1e-10
    assert doc["certified"] is True


def test_cmd_run_zero_state(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG.replace("f = 0.5", "f = 0"))
    assert run_cli(tmp_path, "--config", cfg) == 0
    doc = json.loads((tmp_path / "result.json").read_text())
    assert doc["iterations"] == 0


def test_cmd_run_far_outside_ball_fails_loudly(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_CFG.replace("f = 0.5", "f = 300"))
    code = run_cli(tmp_path, "--config", cfg)
    assert code != 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["exit"] == 1
    assert "reason" in payload
    # the result file still records what happened
    doc = json.loads((tmp_path / "result.json").read_text())
    assert doc["certified"] is False


def test_cmd_run_uncertified_ball_never_silent(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_CFG.replace("f = 0.5", "f = 50"))
    code = run_cli(tmp_path, "--config", cfg)
    assert code != 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["exit"] == 1


def test_cmd_run_reads_state_file(tmp_path):
    from kamact import dump_series, monomial, series_scale, TAYLOR
    x = series_scale(1e-4, monomial(TAYLOR, 32, 1))
    (tmp_path / "state.txt").write_text(dump_series(x))
    cfg = write_cfg(tmp_path, BASE_CFG + f"x.file = {tmp_path}/state.txt\n")
    assert run_cli(tmp_path, "--config", cfg) == 0


# ---------------------------------------------------------------------------
# tables and sweeps
# ---------------------------------------------------------------------------

def test_cmd_epsilon_table(tmp_path):
    assert run_cli(tmp_path, "--command", "epsilon-table") == 0
    lines = (tmp_path / "epsilon_table.csv").read_text().strip().splitlines()
    assert lines[0] == "k,c,nj,delta,eps_closed,eps_product,rel_err"
    rows = [ln.split(",") for ln in lines[1:]]
    assert len(rows) == 3 * 2 * 2 * 3
    by_key = {(r[0], float(r[1]), float(r[2]), float(r[3])): r for r in rows}
    assert float(by_key[("0", 1.0, 1.0, 0.5)][4]) == pytest.approx(9.765625e-4, rel=1e-15)
    assert float(by_key[("1", 2.0, 1.0, 0.5)][4]) == pytest.approx(1.9073486328125e-6, rel=1e-15)
    assert all(float(r[6]) <= 1e-10 for r in rows)


def test_cmd_sweep_grid_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG + "delta.grid = 0.2,0.4,0.6\n"
                                         "f.grid = 0.25,0.5,1.0\n")
    assert run_cli(tmp_path, "--config", cfg, "--command", "sweep") == 0
    first = (tmp_path / "sweep.csv").read_bytes()
    lines = first.decode().strip().splitlines()
    assert lines[0] == "delta,f,status,iterations,residual,rate"
    assert len(lines) == 10
    assert all(ln.split(",")[2] == "Converged" for ln in lines[1:])
    assert run_cli(tmp_path, "--config", cfg, "--command", "sweep") == 0
    assert (tmp_path / "sweep.csv").read_bytes() == first


def test_cmd_sweep_oversized_f_is_data(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG + "delta.grid = 0.4\nf.grid = 10\n")
    assert run_cli(tmp_path, "--config", cfg, "--command", "sweep") == 0
    lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 2  # reported, not asserted


# ---------------------------------------------------------------------------
# verification commands
# ---------------------------------------------------------------------------

def test_cmd_verify_group(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG + "samples = 150\n")
    assert run_cli(tmp_path, "--config", cfg, "--command", "verify-group") == 0
    doc = json.loads((tmp_path / "group_report.json").read_text())
    assert doc["margin_first"] >= -1e-10
    assert doc["kappa_estimate"] > 0.0


def test_cmd_verify_ac(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG + "samples = 100\n")
    assert run_cli(tmp_path, "--config", cfg, "--command", "verify-ac") == 0
    doc = json.loads((tmp_path / "ac_report.json").read_text())
    assert doc["c_estimate"] >= 1.0
    assert all(abs(sl - 2.0) <= 0.05 for sl in doc["scaling_slopes"])


def test_cmd_measure_j_germ(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG)
    assert run_cli(tmp_path, "--config", cfg, "--command", "measure-j") == 0
    doc = json.loads((tmp_path / "jmeasure.json").read_text())
    assert doc["operator"] == "germ_j"
    assert doc["N"] == pytest.approx(1.0, abs=1e-4)


def test_cmd_measure_j_small_divisors(tmp_path):
    cfg = write_cfg(tmp_path, "alpha = 0.6180339887498949\ntau = 1.0\nC = 1.0\n"
                              "m.grid = 32,64\nk.max = 2\n")
    assert run_cli(tmp_path, "--config", cfg, "--command", "measure-j") == 0
    doc = json.loads((tmp_path / "jmeasure.json").read_text())
    assert doc["stabilizing_k"] == 1
    table = (tmp_path / "jmeasure.csv").read_text().strip().splitlines()
    assert table[0] == "k,M32,M64"


def test_cmd_oracle_compare(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG + "oracle.runs = 5\n")
    assert run_cli(tmp_path, "--config", cfg, "--command", "oracle-compare") == 0
    doc = json.loads((tmp_path / "oracle_compare.json").read_text())
    assert doc["worst_coeff_error"] <= 1e-10
    assert len(doc["runs"]) == 5


def test_cmd_oracle_compare_needs_identity_base(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_CFG.replace("a.coeffs = 0,1",
                                               "a.coeffs = 0,1,0.3"))
    code = run_cli(tmp_path, "--config", cfg, "--command", "oracle-compare")
    assert code != 0


def test_unknown_command_usage_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "command = fly\n")
    assert run_cli(tmp_path, "--config", cfg) == 2
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["exit"] == 2


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_cfg(tmp_path, BASE_CFG)
    assert run_cli(tmp_path, "--config", cfg, "--seed", "43") == 0
    first = (tmp_path / "trace.csv").read_bytes()
    assert run_cli(tmp_path, "--config", cfg, "--seed", "44") == 0
    assert (tmp_path / "trace.csv").read_bytes() != first
