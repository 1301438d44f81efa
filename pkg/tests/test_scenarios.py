import numpy as np
import pytest

from openfrag.scenarios import SCENARIOS, default_configs


def run(name, **over):
    cfg = default_configs()[name].replace(**over)
    return SCENARIOS[name][2](cfg, workers=1)


def test_every_scenario_has_defaults():
    assert set(default_configs()) == set(SCENARIOS)
    for key, (fig, desc, runner, cfg) in SCENARIOS.items():
        assert cfg.scenario == key and callable(runner) and fig and desc


def test_fig3_offblock_decay():
    result = run("fig3")
    assert all(c.passed for c in result.checks)
    values = [v.real for _, name, v in result.series["coherence"] if name == "offblock_max"]
    assert values[0] > 0.1 and values[-1] <= 1e-6
    assert np.all(np.diff(values) <= 1e-15)


def test_fig5_stationary_coherence():
    result = run("fig5")
    assert all(c.passed for c in result.checks)
    (entry,) = result.summary
    assert entry["saturation_value"] > 1e-3


def test_fig8_statistics():
    result = run("fig8", sizes=(2, 4, 6, 8))
    assert all(c.passed for c in result.checks)


@pytest.mark.slow
def test_fig4_saturation_triples():
    result = run("fig4")
    by_channel = {e["channel"]: e for e in result.summary}
    assert set(by_channel) == {"dephasing", "structure_preserving", "spin_flip"}
    for ch in ("dephasing", "structure_preserving"):
        e = by_channel[ch]
        assert e["abs_error"] <= 1e-4
        assert abs(e["saturation"] - e["bound"]) == pytest.approx(e["abs_error"])


@pytest.mark.slow
def test_fig7_negativity_matches_stationary_state():
    result = run("fig7", sizes=(4, 6))
    assert all(c.passed for c in result.checks)
    for e in result.summary:
        assert e["abs_error"] <= 1e-6
