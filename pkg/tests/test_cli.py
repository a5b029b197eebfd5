import json
import subprocess
import sys

import pytest

from lentparticle.cli import main


def run_cli(*argv):
    return main(list(argv))


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


DOLEANS_INI = """
[run]
scenario = doleans
seed = 7

[numeric]
step = 0.01
"""


def test_simulate_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, DOLEANS_INI)
    out = tmp_path / "out"
    assert run_cli("simulate", "--config", cfg, "--out", str(out)) == 0
    assert (out / "trajectory.csv").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 7
    assert manifest["outputs"] == ["trajectory.csv"]
    assert "jumps" in capsys.readouterr().out


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, DOLEANS_INI)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("simulate", "--config", cfg, "--out", str(out1)) == 0
    assert run_cli("simulate", "--config", str(out1 / "manifest.json"),
                   "--out", str(out2)) == 0
    for name in ("trajectory.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_manifest_carries_cli_seed(tmp_path):
    # seed given only on the command line must still round-trip through the
    # manifest
    cfg = write_config(tmp_path, "[run]\nscenario = doleans\n\n[numeric]\nstep = 0.01\n")
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("simulate", "--config", cfg, "--seed", "12", "--out", str(out1)) == 0
    assert run_cli("simulate", "--config", str(out1 / "manifest.json"),
                   "--out", str(out2)) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, DOLEANS_INI)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    run_cli("simulate", "--config", cfg, "--out", str(out1))
    run_cli("simulate", "--config", cfg, "--seed", "8", "--out", str(out2))
    assert (out1 / "trajectory.csv").read_bytes() != (out2 / "trajectory.csv").read_bytes()
    assert json.loads((out2 / "manifest.json").read_text())["seed"] == 8


def test_missing_seed_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, "[run]\nscenario = doleans\n")
    assert run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "run.seed" in capsys.readouterr().err


def test_bad_step_names_offending_key(tmp_path, capsys):
    cfg = write_config(tmp_path, "[run]\nscenario = doleans\nseed = 1\n\n[numeric]\nstep = 0\n")
    assert run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "numeric.step" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "[run]\nscenario = doleans\nseed = 1\nbogus = 3\n")
    assert run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "run.bogus" in capsys.readouterr().err


def test_unknown_scenario_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "[run]\nscenario = wat\nseed = 1\n")
    assert run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "run.scenario" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert run_cli("simulate", "--config", str(tmp_path / "nope.ini"),
                   "--out", str(tmp_path / "o")) == 2


@pytest.mark.parametrize("tag", ["theorem9", "remark3", "generic", "rho_mc"])
def test_gamma_tags(tmp_path, tag):
    text = DOLEANS_INI + f"\n[gamma]\nformula = {tag}\n"
    if tag == "rho_mc":
        text = text.replace("step = 0.01", "step = 0.01\ndraws = 2000")
    cfg = write_config(tmp_path, text)
    out = tmp_path / tag
    assert run_cli("gamma", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads((out / "gamma.json").read_text())
    assert doc["gamma"]["formula_tag"] == tag
    assert doc["cross_check"]["within_tolerance"]
    assert doc["rank"]["rank"] >= 1


def test_gamma_unknown_tag(tmp_path, capsys):
    cfg = write_config(tmp_path, DOLEANS_INI + "\n[gamma]\nformula = bogus\n")
    assert run_cli("gamma", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "gamma.formula" in capsys.readouterr().err


def test_gamma_rerun_byte_identical(tmp_path):
    cfg = write_config(tmp_path, DOLEANS_INI + "\n[gamma]\nformula = theorem9\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("gamma", "--config", cfg, "--out", str(out1)) == 0
    assert run_cli("gamma", "--config", str(out1 / "manifest.json"), "--out", str(out2)) == 0
    assert (out1 / "gamma.json").read_bytes() == (out2 / "gamma.json").read_bytes()
    assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()


def test_rank_stats(tmp_path):
    cfg = write_config(
        tmp_path,
        "[run]\nscenario = doleans\nseed = 5\n\n"
        "[numeric]\nstep = 0.01\nepsilons = 0.06 0.03\nn_paths = 4\n",
    )
    out = tmp_path / "rs"
    assert run_cli("rank-stats", "--config", cfg, "--out", str(out)) == 0
    lines = (out / "rank_stats.csv").read_text().strip().splitlines()
    assert len(lines) == 3  # header + one row per epsilon
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"] == "doleans"
    assert summary["seed"] == 5
    assert len(summary["rows"]) == 2


def test_rank_stats_missing_epsilons(tmp_path, capsys):
    cfg = write_config(tmp_path, "[run]\nscenario = doleans\nseed = 5\n")
    assert run_cli("rank-stats", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "numeric.epsilons" in capsys.readouterr().err


def test_custom_scenario_expressions(tmp_path):
    cfg = write_config(
        tmp_path,
        """
[run]
scenario = custom
seed = 3

[model]
kind = uniform
halfwidth = 0.6
truncation = 0.1
intensity = 4.0

[numeric]
step = 0.01

[coefficients]
state_dim = 2
x0 = 0.5 0.0
c_1 = u1
c_2 = x1 * u1

[structure]
k = 1
psi = 1
xi_1 = u1^2
""",
    )
    out = tmp_path / "cs"
    assert run_cli("gamma", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads((out / "gamma.json").read_text())
    assert doc["cross_check"]["within_tolerance"]


def test_custom_scenario_requires_coefficients(tmp_path, capsys):
    cfg = write_config(tmp_path, "[run]\nscenario = custom\nseed = 1\n")
    assert run_cli("simulate", "--config", cfg, "--out", str(tmp_path / "o")) == 2
    assert "coefficients" in capsys.readouterr().err


def test_example_doleans(tmp_path, capsys):
    out = tmp_path / "ex"
    assert run_cli("example", "doleans", "--seed", "4", "--out", str(out)) == 0
    doc = json.loads((out / "gamma.json").read_text())
    assert doc["cross_check"]["within_tolerance"]
    assert (out / "samples.csv").is_file()
    assert (out / "manifest.json").is_file()
    assert "closed-form vs pipeline" in capsys.readouterr().out


def test_example_levy_area_rerun_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("example", "levy-area-1", "--seed", "2", "--out", str(out1)) == 0
    assert run_cli("example", "levy-area-1", "--config", str(out1 / "manifest.json"),
                   "--out", str(out2)) == 0
    for name in ("gamma.json", "samples.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_example_mckean(tmp_path):
    out = tmp_path / "mk"
    assert run_cli("example", "mckean", "--seed", "3", "--out", str(out)) == 0
    doc = json.loads((out / "gamma.json").read_text())
    assert len(doc["picard_residuals"]) == 3
    assert doc["rank"]["rank"] == 1
    rows = (out / "samples.csv").read_text().strip().splitlines()
    assert rows[0] == "particle,x_t"
    assert len(rows) == 25


def test_example_stable_like(tmp_path):
    cfg = write_config(tmp_path, "[numeric]\ndraws = 2000\n")
    out = tmp_path / "sl"
    assert run_cli("example", "stable-like", "--config", cfg, "--seed", "6",
                   "--out", str(out)) == 0
    doc = json.loads((out / "diagnostics.json").read_text())
    assert doc["generator_check"]["passed"]
    assert doc["pushforward_max_relative_error"] <= 1e-10
    assert doc["zeta"]["1.0"] == pytest.approx(1.0 / 3.141592653589793, rel=1e-12)


def test_console_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "lentparticle.cli", "--version"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert res.stdout.strip()
