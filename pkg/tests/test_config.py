#!/usr/bin/env python3
"""
Tests for run configuration loading

Tests:
  1. Shipped presets validate
  2. Validation errors name every failing field
  3. beta: inf is accepted and written back as "inf"
  4. Engine / model consistency rules
  5. Preset + file + override layering
  6. Unreadable YAML reports its position
  7. Negative temperatures, unknown keys and the mode ordering
  8. Dense mode caps come from the environment
"""

import importlib
import math
import sys
from pathlib import Path

import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src import config
from src.models.layout import Ordering
from src.storage.models import (
    AnalysisConfig,
    BathConfig,
    Engine,
    RunConfig,
    SystemConfig,
    TimeConfig,
    available_presets,
    deep_merge,
    load_config,
    load_preset,
    validate_config,
)
from src.utils.errors import ConfigError


def test_presets_load():
    names = available_presets()
    assert {"fermi-chain-fig5", "fermi-chain-fig6", "siam-eq", "siam-hot"} <= set(names), f"Presets found: {names}"
    for name in names:
        run = load_config(preset=name)
        assert run.preset == name

    fig5 = load_config(preset="fermi-chain-fig5")
    assert fig5.engine is Engine.GAUSSIAN and fig5.system.L == 3
    assert [b.attached_mode(3) for b in fig5.baths] == [0, 2], "Leads sit on the chain ends"

    siam = load_config(preset="siam-eq")
    assert siam.engine is Engine.ED and siam.has_interactions
    assert siam.current_bond == 0


def test_unknown_preset():
    with pytest.raises(ConfigError) as e:
        load_preset("no-such-preset")
    assert "siam-eq" in str(e.value), "Error should list the available presets"


def test_errors_list_every_field():
    data = {
        "system": {"L": 0},
        "baths": [{"id": "b", "gamma": -1.0}],
        "time": {"dtau": 0.0},
    }
    with pytest.raises(ConfigError) as e:
        validate_config(data)
    message = str(e.value)
    for loc in ("system.L", "baths.0.gamma", "time.dtau"):
        assert loc in message, f"'{loc}' missing from: {message}"


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        validate_config({"system": {"L": 2, "colour": "red"}})


def test_infinite_beta():
    run = validate_config({"system": {"L": 1}, "baths": [{"id": "cold", "beta": "inf"}]})
    assert math.isinf(run.baths[0].beta)
    assert run.baths[0].to_spec(1).zero_temperature
    assert run.resolved()["baths"][0]["beta"] == "inf"
    assert math.isinf(validate_config(run.resolved()).baths[0].beta), "Resolved config must load again"


def test_consistency_rules():
    with pytest.raises(ConfigError, match="engine=ed"):
        validate_config({"system": {"L": 2, "U": 0.5}, "engine": "gaussian"})
    with pytest.raises(ConfigError, match="L=2"):
        validate_config({"system": {"model": "siam", "L": 3}, "engine": "ed"})
    with pytest.raises(ConfigError, match="duplicate"):
        validate_config({"baths": [{"id": "a"}, {"id": "a", "side": "right"}]})
    with pytest.raises(ConfigError, match="one bath per side"):
        validate_config({"baths": [{"id": "a"}, {"id": "b"}]})
    with pytest.raises(ConfigError, match="at most 14 modes"):
        validate_config({"system": {"L": 2}, "engine": "ed",
                         "baths": [{"id": "a", "M": 3}, {"id": "b", "side": "right", "M": 3}]})
    with pytest.raises(ConfigError, match="empty time grid"):
        validate_config({"time": {"tau_max": 0.05, "dtau": 0.1}})


def test_defaults():
    run = RunConfig()
    assert run.derivative_step == run.time.dtau
    assert run.current_bond == run.system.L - 2
    assert run.time.grid()[:3] == [0.0, 0.1, 0.2]
    assert len(run.time.grid()) == run.time.steps + 1


def test_deep_merge():
    base = {"system": {"L": 3, "t_c": 0.02}, "baths": [{"id": "a"}, {"id": "b"}]}
    merged = deep_merge(base, {"system": {"L": 2}, "baths": [{"id": "c"}]})
    assert merged["system"] == {"L": 2, "t_c": 0.02}, "Nested mappings merge"
    assert merged["baths"] == [{"id": "c"}], "Lists replace"
    assert base["system"]["L"] == 3, "Base is not modified"


def test_layering(tmp_path):
    run_file = tmp_path / "run.yaml"
    run_file.write_text(
        "preset: fermi-chain-fig5\n"
        "time:\n"
        "  tau_max: 5.0\n"
        "analysis:\n"
        "  reconstruction_states: 3\n"
    )
    run = load_config(str(run_file), overrides={"threads": 4, "engine": None})
    assert run.preset == "fermi-chain-fig5"
    assert run.time.tau_max == 5.0 and run.time.dtau == 0.1, "File overrides the preset field by field"
    assert run.analysis.reconstruction_states == 3
    assert run.analysis.tau_m_map == 40.0, "Untouched preset values survive"
    assert run.threads == 4 and run.engine is Engine.GAUSSIAN, "None overrides are ignored"


def test_yaml_errors(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("system:\n  L: [1, 2\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(str(broken))

    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "missing.yaml"))

    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(str(listing))


def test_negative_temperature_rejected():
    with pytest.raises(ConfigError, match="baths.0.beta"):
        validate_config({"system": {"L": 1}, "baths": [{"id": "lead", "beta": -1.0}]})


def test_sections_forbid_extra_keys():
    for model in (RunConfig, SystemConfig, BathConfig, TimeConfig, AnalysisConfig):
        assert model.model_config.get("extra") == "forbid", f"{model.__name__} accepts unknown keys"
    with pytest.raises(ConfigError, match="analysis.tau_m"):
        validate_config({"analysis": {"tau_m": 3.0}})


def test_ordering():
    assert RunConfig().ordering is Ordering.SEPARATED
    run = validate_config({"system": {"L": 2}, "engine": "ed", "ordering": "interleaved",
                           "baths": [{"id": "a", "M": 1}, {"id": "b", "side": "right", "M": 1}]})
    assert run.ordering is Ordering.INTERLEAVED
    assert run.resolved()["ordering"] == "interleaved"
    with pytest.raises(ConfigError, match="ordering"):
        validate_config({"ordering": "zigzag"})


def test_mode_caps_from_environment(monkeypatch):
    original = (config.ED_MAX_MODES, config.RDM_MAX_MODES)
    monkeypatch.setenv("CHOIMAP_ED_MAX_MODES", "10")
    monkeypatch.setenv("CHOIMAP_RDM_MAX_MODES", "8")
    try:
        importlib.reload(config)
        assert config.ED_MAX_MODES == 10 and config.RDM_MAX_MODES == 8
        with pytest.raises(ConfigError, match="at most 10 modes"):
            validate_config({"system": {"L": 2}, "engine": "ed",
                             "baths": [{"id": "a", "M": 2}, {"id": "b", "side": "right", "M": 2}]})
    finally:
        monkeypatch.undo()
        importlib.reload(config)
    assert (config.ED_MAX_MODES, config.RDM_MAX_MODES) == original
