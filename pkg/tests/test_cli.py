import json
import subprocess
import sys

import numpy as np
import pytest

from weightlab.cli import read_profile, run
from weightlab.radial import decay_fit


def _run(tmp_path, *argv):
    return run([*argv, "--out", str(tmp_path)])


def _json(tmp_path, name):
    return json.loads((tmp_path / f"{name}.json").read_text())


def test_exponents_prints_chi_and_q(tmp_path, capsys):
    assert _run(tmp_path, "exponents", "--D", "4", "--p", "2") == 0
    assert "chi=2 q=4" in capsys.readouterr().out
    doc = _json(tmp_path, "exponents")
    assert doc["result"]["chi"] == 2.0 and doc["result"]["q"] == 4.0
    assert doc["config"]["D"] == 4.0


def test_dim_byte_identical(tmp_path):
    argv = ["dim", "--weight", "monomial:1,1", "--samples", "200", "--seed", "7"]
    assert _run(tmp_path, *argv) == 0
    first = (tmp_path / "dim.json").read_bytes()
    first_csv = (tmp_path / "dim.csv").read_bytes()
    assert _run(tmp_path, *argv) == 0
    assert (tmp_path / "dim.json").read_bytes() == first
    assert (tmp_path / "dim.csv").read_bytes() == first_csv
    assert json.loads(first)["result"]["D_hat"] == pytest.approx(4.0, abs=1e-12)


def test_dim_seed_changes_samples(tmp_path):
    _run(tmp_path, "dim", "--weight", "power:1", "--N", "2", "--samples", "5", "--seed", "1", "--name", "a")
    _run(tmp_path, "dim", "--weight", "power:1", "--N", "2", "--samples", "5", "--seed", "2", "--name", "b")
    rows = [(tmp_path / f"{n}.csv").read_text().splitlines()[3:] for n in ("a", "b")]
    assert rows[0][0] == rows[1][0]  # origin anchor
    assert rows[0][1:] != rows[1][1:]


def test_shoot_profile_decays_like_bubble(tmp_path, capsys):
    assert _run(tmp_path, "shoot", "--p", "2", "--D", "4", "--alpha", "1", "--rmax", "50") == 0
    r, u = read_profile(tmp_path / "shoot.csv")
    assert r[-1] == pytest.approx(50.0)
    fit = decay_fit(r, u, (20.0, 50.0))
    assert fit.exponent == pytest.approx(2.0, rel=0.02)
    assert (tmp_path / "shoot.gp").exists()
    text = (tmp_path / "shoot.csv").read_text().splitlines()
    assert text[0].startswith("# weightlab shoot") and text[1].startswith("# config {") and text[2] == "r,u,du"


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# exponents run\nD = 6\np = 3  # trailing comment\n")
    assert _run(tmp_path, "exponents", "--config", str(cfg)) == 0
    assert _json(tmp_path, "exponents")["result"]["q"] == 6.0
    assert _run(tmp_path, "exponents", "--config", str(cfg), "--p", "2") == 0
    assert _json(tmp_path, "exponents")["result"]["q"] == 3.0


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert _run(tmp_path, "exponents", "--config", str(cfg)) == 2


def test_unknown_subcommand_and_flag(tmp_path, capsys):
    assert run(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err
    assert _run(tmp_path, "dim", "--bogus", "1") == 2
    assert "usage" in capsys.readouterr().err


def test_invalid_input_exit_codes(tmp_path):
    assert _run(tmp_path, "exponents", "--D", "2", "--p", "3") == 2
    assert _run(tmp_path, "ballmass", "--weight", "power:-3", "--N", "2") == 2
    assert _run(tmp_path, "chain", "--r", "2", "--t", "1") == 2
    doc = _json(tmp_path, "chain")["result"]
    assert doc["consistent"] is False and doc["rhs"] == 0.25
    assert _run(tmp_path, "solve", "--bc", "x + undefined_name") == 2


def test_chain_consistent(tmp_path):
    assert _run(tmp_path, "chain", "--r", "1.6", "--t", str(4 / 3)) == 0
    assert _json(tmp_path, "chain")["result"]["s"] == pytest.approx(8.0, abs=1e-12)


def test_solve_not_converged_exit_one(tmp_path):
    code = _run(tmp_path, "solve", "--p", "3", "--n", "17", "--bc", "sin(3*x)*y", "--max-sweeps", "1")
    assert code == 1
    assert _json(tmp_path, "solve")["result"]["converged"] is False
    assert (tmp_path / "solve.field").exists()


def test_solve_then_field_diagnostics(tmp_path):
    bc = "2 + sin(1.5*x) + 0.5*cos(2*y)"
    assert _run(tmp_path, "solve", "--p", "3", "--n", "33", "--bc", bc) == 0
    fld = str(tmp_path / "solve.field")
    assert _run(tmp_path, "harnack", "--field", fld) == 0
    rep = _json(tmp_path, "harnack")["result"]
    assert rep["scaling_ok"] is True and rep["ratio"] > 1
    assert _run(tmp_path, "oscillation", "--field", fld) == 0
    assert _json(tmp_path, "oscillation")["result"]["theta_fit"] < 1
    assert _run(tmp_path, "compare", "--u", fld, "--v", fld) == 0
    assert _json(tmp_path, "compare")["result"]["holds"] is True


def test_radial_source_commands(tmp_path):
    assert _run(tmp_path, "tail", "--radial", "r**-2", "--D", "3", "--q", "3", "--R", "1,2,4") == 0
    assert _json(tmp_path, "tail")["result"]["theta_hat"] == pytest.approx(2.0**-3, rel=1e-8)
    assert _run(tmp_path, "moser", "--p", "2", "--D", "4", "--s-max", "8192") == 0
    assert _json(tmp_path, "moser")["result"]["rows"][-1]["psi"] >= 0.99
    assert _run(tmp_path, "bmo", "--radial", "log(1/r)", "--D", "2") == 0
    per = _json(tmp_path, "bmo")["result"]["per_ball"]
    assert max(per) - min(per) < 1e-10


def test_decay_from_profile(tmp_path):
    _run(tmp_path, "shoot", "--p", "2", "--D", "4", "--rmax", "100")
    assert _run(tmp_path, "decay", "--profile", str(tmp_path / "shoot.csv"), "--D", "4", "--R0", "30") == 0
    res = _json(tmp_path, "decay")["result"]
    assert res["lambda_hat"] > 0 and res["strict"] is True


def test_bubble_and_supersolution(tmp_path):
    assert _run(tmp_path, "bubble", "--p", "2", "--D", "3") == 0
    assert _json(tmp_path, "bubble")["result"]["c_hat"] == pytest.approx(3.0, abs=1e-3)
    assert _run(tmp_path, "supersolution", "--p", "3", "--D", "6", "--s", "1.2") == 0
    res = _json(tmp_path, "supersolution")["result"]
    assert res["max_residual"] < 1e-5 and res["observed_order"] > 1.9


def test_outputs_embed_config(tmp_path):
    _run(tmp_path, "bubble", "--D", "4")
    cfg = _json(tmp_path, "bubble")["config"]
    for suffix in (".csv", ".gp"):
        line = [ln for ln in (tmp_path / f"bubble{suffix}").read_text().splitlines() if ln.startswith("# config ")][0]
        assert json.loads(line[len("# config "):]) == cfg


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "weightlab", "exponents", "--D", "4", "--p", "2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert out.returncode == 0 and "chi=2 q=4" in out.stdout


def test_ap_reports_violations(tmp_path):
    assert _run(tmp_path, "ap", "--weight", "power:-3", "--samples", "5") == 0
    res = _json(tmp_path, "ap")["result"]
    assert res["holds"] is False and res["constant"] == "inf"
    assert _run(tmp_path, "ap", "--weight", "power:1", "--samples", "10") == 0
    assert np.isfinite(_json(tmp_path, "ap")["result"]["constant"])
