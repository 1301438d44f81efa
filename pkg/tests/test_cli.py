import json

import pytest

from openfrag import cli
from openfrag.config import ConfigError, ExperimentConfig, load, parse, serialize
from openfrag.scenarios import SCENARIOS, Check, ScenarioResult, default_configs


def test_config_round_trip():
    cfg = ExperimentConfig("fig8", n_sites=6, gamma=0.25, seed=9, sizes=(2, 4, 6))
    back = parse(serialize(cfg))["fig8"]
    assert back == cfg
    many = [ExperimentConfig("fig3"), ExperimentConfig("fig4", channel="spin_flip")]
    assert list(parse(serialize(many)).values()) == many


def test_config_defaults_and_errors(tmp_path):
    defaults = default_configs()
    got = parse("[fig3]\nseed = 4\n", defaults)["fig3"]
    assert got == defaults["fig3"].replace(seed=4)
    with pytest.raises(ConfigError):
        parse("[fig3]\nspeed = 4\n")
    with pytest.raises(ConfigError):
        parse("[fig3]\nn_sites = four\n")
    with pytest.raises(ConfigError):
        parse("no section header")
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.cfg")
    assert ExperimentConfig("x", n_sites=6).middle_cut == 3


def test_list(capsys):
    assert cli.main(["--list"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert [line.split("\t")[0] for line in out] == list(SCENARIOS)
    assert all(len(line.split("\t")) == 3 for line in out)


def test_unknown_scenario_exit_code(tmp_path, capsys):
    assert cli.main(["--scenario", "fig99", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "unknown scenario" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[fig3]\nwhatever = 1\n")
    assert cli.main(["--config", str(cfg)]) == cli.EXIT_CONFIG
    assert cli.main(["--scenario", "fig3", "--seed", "-1", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_fig3_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--scenario", "fig3", "--out", str(a), "--workers", "1"]) == 0
    assert cli.main(["--scenario", "fig3", "--out", str(b), "--workers", "1"]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "coherence.csv").read_text().splitlines()[0]
    assert header == "step,observable_name,value_real,value_imag"
    assert b"\r\n" not in (a / csvs[0]).read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config"]["scenario"] == "fig3"
    assert {"openfrag", "numpy", "scipy", "python"} <= set(manifest["versions"])
    assert all("content_hash" in d for d in manifest["decompositions"].values())
    summary = json.loads((a / "summary.json").read_text())
    assert summary["failed_invariants"] == []


def test_config_file_drives_run(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"[fig3]\nseed = 5\noutput_dir = {tmp_path / 'o'}\n")
    assert cli.main(["--config", str(cfg), "--workers", "1"]) == 0
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]["seed"] == 5


def test_truncated_run_reports_violation(tmp_path):
    # off-block coherences cannot reach the decay threshold within five steps
    cfg = tmp_path / "short.cfg"
    cfg.write_text(f"[fig3]\nn_steps = 5\noutput_dir = {tmp_path / 'o'}\n")
    assert cli.main(["--config", str(cfg), "--workers", "1"]) == cli.EXIT_INVARIANT


def test_invariant_violation_exit_code(tmp_path, monkeypatch, capsys):
    def failing(cfg, workers=1):
        result = ScenarioResult()
        result.check("forced", "value below limit", 2.0, 1.0, False)
        return result

    fig, desc, _, default = SCENARIOS["fig3"]
    monkeypatch.setitem(SCENARIOS, "fig3", (fig, desc, failing, default))
    assert cli.main(["--scenario", "fig3", "--out", str(tmp_path)]) == cli.EXIT_INVARIANT
    assert "forced" in capsys.readouterr().err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["failed_invariants"] == ["forced"]


def test_write_series_csv_format(tmp_path):
    path = tmp_path / "s.csv"
    cli.write_series_csv(path, [(0, "x", complex(0.1, -2.0)), (1, "x", complex(1.0))])
    assert path.read_text() == "step,observable_name,value_real,value_imag\n0,x,0.1,-2.0\n1,x,1.0,0.0\n"


def test_check_dataclass():
    c = Check("n", "i", 1.0, 2.0, True)
    assert c.passed and c.limit == 2.0
