"""JSON run configuration: schema, defaults and validation.

A config is a JSON object whose top-level keys are sections.  Every section
and every key inside it must appear in :data:`SCHEMA`; anything else is
rejected.  Missing keys take the listed defaults (``None`` means "required
by the commands that use it").
"""
from __future__ import annotations

import copy
import json
import math
from numbers import Real

from .errors import ConfigError

NUM, INT, STR, NUMLIST, POINTS = "number", "integer", "string", "numbers", "points"

# section -> key -> (kind, default)
SCHEMA = {
    "physical": {"F": (NUM, None), "delta": (NUM, None)},
    "wave": {"k": (NUM, None), "qbar": (NUM, 1.0), "points": (POINTS, None)},
    "numerics": {"n": (INT, 128), "tol": (NUM, 1e-10)},
    "dressler": {"qbar": (NUM, 1.0), "h_plus": (NUMLIST, None), "sweep": (INT, 10)},
    "whitham": {"nX": (INT, 32), "dt": (NUM, None), "cfl": (NUM, 0.4), "Tend": (NUM, 0.01),
                "length": (NUM, 1.25), "amp_k": (NUM, 0.02), "amp_q": (NUM, 0.02),
                "box": (NUM, 0.04)},
    "evans": {"radius": (NUM, 1e-3), "npts": (INT, 25), "radii": (NUMLIST, [1e-2, 1e-3, 1e-4]),
              "seed": (INT, 0), "samples": (INT, 8)},
    "bloch": {"l_min": (NUM, 1e-3), "l_max": (NUM, 1e-1), "num": (INT, 11)},
    "sim": {"n_per_period": (INT, 512), "cells": (INT, 1 << 16), "cfl": (NUM, 0.45),
            "t_end": (NUM, None), "limiter": (STR, "none"), "stride": (INT, 16),
            "eps": (NUMLIST, [0.1, 0.05, 0.025]), "order": (INT, 0),
            "compare_every": (INT, 4)},
    "stability": {"chunk": (INT, 4), "evans_npts": (INT, 13)},
    "output": {"dir": (STR, "out"), "format": (STR, "csv")},
}

CHOICES = {("output", "format"): ("csv", "json"),
           ("sim", "limiter"): ("none", "minmod", "mc", "vanleer"),
           ("sim", "order"): (0, 1)}


def _check(section: str, key: str, kind: str, value):
    where = f"{section}.{key}"
    if value is None:
        return None
    if kind == NUM:
        if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
            raise ConfigError(f"{where}: expected a finite number, got {value!r}")
        return float(value)
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if kind == STR:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if kind == NUMLIST:
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list of numbers")
        return [_check(section, key, NUM, v) for v in value]
    if kind == POINTS:
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list of {{k, qbar}} objects")
        out = []
        for p in value:
            if not isinstance(p, dict) or set(p) - {"k", "qbar"} or "k" not in p:
                raise ConfigError(f"{where}: each point needs 'k' and optional 'qbar' only")
            out.append({"k": _check(section, "k", NUM, p["k"]),
                        "qbar": _check(section, "qbar", NUM, p.get("qbar", 1.0))})
        return out
    raise AssertionError(kind)


def resolve(raw: dict) -> dict:
    """Validate ``raw`` against the schema and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    out = {}
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be an object")
        bad = sorted(set(given) - set(keys))
        if bad:
            raise ConfigError(f"unknown key(s) in {section}: {', '.join(bad)}")
        sec = {}
        for key, (kind, default) in keys.items():
            val = _check(section, key, kind, given.get(key, copy.deepcopy(default)))
            allowed = CHOICES.get((section, key))
            if allowed is not None and val not in allowed:
                raise ConfigError(f"{section}.{key}: must be one of {allowed}, got {val!r}")
            sec[key] = val
        out[section] = sec
    return out


def load(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return resolve(raw)


def require(cfg: dict, section: str, *keys: str) -> None:
    missing = [k for k in keys if cfg[section][k] is None]
    if missing:
        raise ConfigError(f"missing required key(s) in {section}: {', '.join(missing)}")


def wave_points(cfg: dict) -> list[tuple[float, float]]:
    """Points of a sweep (``wave.points``) or the single ``wave.k``."""
    w = cfg["wave"]
    if w["points"]:
        return [(p["k"], p["qbar"]) for p in w["points"]]
    require(cfg, "wave", "k")
    return [(w["k"], w["qbar"])]


def dumps(obj) -> str:
    """Deterministic JSON text (insertion order, fixed float repr)."""
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"
