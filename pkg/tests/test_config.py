import json

import pytest
from hypothesis import given, settings, strategies as st

from rollwave import config
from rollwave.errors import ConfigError


def test_defaults_filled():
    cfg = config.resolve({"physical": {"F": 3, "delta": 0.01}})
    assert cfg["physical"] == {"F": 3.0, "delta": 0.01}
    assert cfg["numerics"]["n"] == 128
    assert cfg["sim"]["limiter"] == "none"
    assert set(cfg) == set(config.SCHEMA)


@settings(max_examples=30, deadline=None)
@given(st.text(min_size=1, max_size=12).filter(lambda s: s not in config.SCHEMA["physical"]))
def test_unknown_key_rejected(key):
    with pytest.raises(ConfigError, match="unknown key"):
        config.resolve({"physical": {"F": 3, "delta": 0.01, key: 1}})


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown config section"):
        config.resolve({"plots": {}})


@pytest.mark.parametrize("raw", [
    {"physical": {"F": "3"}},
    {"physical": {"F": True}},
    {"numerics": {"n": 128.0}},
    {"output": {"format": "xml"}},
    {"sim": {"limiter": "superbee"}},
    {"sim": {"order": 2}},
    {"wave": {"points": [{"q": 1}]}},
    {"dressler": {"h_plus": []}},
    {"physical": []},
])
def test_type_errors(raw):
    with pytest.raises(ConfigError):
        config.resolve(raw)


def test_nonfinite_rejected():
    with pytest.raises(ConfigError):
        config.resolve({"physical": {"F": float("nan")}})


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        config.load(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        config.load(str(bad))


def test_wave_points_and_require():
    cfg = config.resolve({"wave": {"points": [{"k": 0.2}, {"k": 0.3, "qbar": 2}]}})
    assert config.wave_points(cfg) == [(0.2, 1.0), (0.3, 2.0)]
    with pytest.raises(ConfigError, match="missing"):
        config.wave_points(config.resolve({}))


def test_dumps_deterministic():
    cfg = config.resolve({"physical": {"F": 3, "delta": 0.01}})
    assert config.dumps(cfg) == config.dumps(json.loads(config.dumps(cfg)))
