"""``key=value`` configuration files and flag overrides.

Files hold one ``key=value`` per line; ``#`` starts a comment. Values from
flags override values from the file, and both override the defaults. Every
key is checked against the defaults of the command being configured.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .policies import PolicySpec
from .processes import Channel, Constant, ConfigurationError, IncrementProcess, Scheduled, TwoPointIid
from .sim import ScenarioConfig

RHO_GRID = "0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5"

WEIGHT_KEYS = {"weight_low": 1.0, "weight_high": 100.0, "weight_prob": 0.01}

SCENARIO_DEFAULTS = {
    "rho": 0.25, "p": 1.0, "V": 1.0, "T": 5000, "seed": 0, "sigma2": 1.0,
    "weights": "critical", "critical_len": 50, "critical_weight": 100.0, "ordinary_weight": 1.0,
    **WEIGHT_KEYS, "policy": "adaptive", "period": 4, "batches": 100,
}

COMMAND_DEFAULTS = {
    "sample-path": {"rho": 0.25, "p": 1.0, "V": 1.0, "T": 5000, "seed": 0, "sigma2": 1.0,
                    "critical_len": 50, "critical_weight": 100.0, "ordinary_weight": 1.0, "batches": 100},
    "tradeoff": {"p": 0.8, "rhos": RHO_GRID, "T": 1_000_000, "V": 1.0, "seed": 0, "sigma2": 1.0, **WEIGHT_KEYS,
                 "q_bins": 201, "age_max": 100, "rvi_tol": 1e-8, "rvi_max_iter": 100_000, "batches": 100,
                 "jobs": 1},
    "bound-check": {"ps": "0.8,1", "rhos": "0.1,0.25,0.5", "Vs": "0.1,1,10", "T": 1_000_000, "seed": 0,
                    "sigma2": 1.0, **WEIGHT_KEYS, "batches": 100},
    "control-demo": {"plants": "1:1:1,0.9:2:0.25", "p": 0.8, "rho": 0.25, "V": 1.0, "T": 1_000_000, "seed": 0,
                     **WEIGHT_KEYS, "policy": "adaptive", "period": 4, "batches": 100},
    "rvi-solve": {"metric": "uoi", "rho": 0.25, "p": 0.8, "sigma2": 1.0, **WEIGHT_KEYS, "q_bins": 201,
                  "q_max": 0.0, "age_max": 100, "rvi_tol": 1e-8, "rvi_max_iter": 100_000},
}


def _unit_interval(key, v):
    if not 0 < v <= 1:
        raise ConfigurationError(f"{key}={v} out of range: must lie in (0, 1]")


def _positive(key, v):
    if not v > 0:
        raise ConfigurationError(f"{key}={v} out of range: must be > 0")


def _non_negative(key, v):
    if v < 0:
        raise ConfigurationError(f"{key}={v} out of range: must be >= 0")


def _float_list(key, v):
    try:
        return [float(x) for x in str(v).split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"{key}: expected a comma-separated list of numbers, got {v!r}") from None


_CHECKS = {
    "rho": _unit_interval, "p": _unit_interval, "V": _positive, "T": _positive, "sigma2": _positive,
    "q_bins": _positive, "age_max": _positive, "rvi_tol": _positive, "rvi_max_iter": _positive,
    "batches": _positive, "jobs": _positive, "period": _positive, "critical_len": _non_negative,
    "critical_weight": _non_negative, "ordinary_weight": _non_negative, "weight_low": _non_negative,
    "weight_high": _non_negative, "q_max": _non_negative,
}
_LIST_CHECKS = {"rhos": _unit_interval, "ps": _unit_interval, "Vs": _positive}
_CHOICES = {"weights": ("critical", "iid", "constant"), "policy": ("adaptive", "randomized", "periodic",
                                                                   "never", "always"),
            "metric": ("uoi", "aoi")}


def read_config_lines(source) -> list[str]:
    """Lines of a config given as a path, a string or an iterable of lines."""
    if source is None:
        return []
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "=" not in source):
        return Path(source).read_text().splitlines()
    if isinstance(source, str):
        return source.splitlines()
    return list(source)


def parse_pairs(lines: Iterable[str]) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"line {n}: expected key=value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        return str(value).lower() in ("1", "true", "yes")
    try:
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: cannot parse {value!r} as {type(default).__name__}") from None
    return str(value)


def resolve_settings(defaults: Mapping[str, object], source=None,
                     overrides: Mapping[str, object] | None = None) -> dict:
    """Merge defaults, file values and overrides, validating every key."""
    merged = dict(defaults)
    layers = [parse_pairs(read_config_lines(source)), {k: v for k, v in (overrides or {}).items() if v is not None}]
    for layer in layers:
        for key, value in layer.items():
            if key not in defaults:
                raise ConfigurationError(f"unknown key {key!r}")
            merged[key] = _coerce(key, value, defaults[key])
    for key, value in merged.items():
        if key in _CHECKS:
            _CHECKS[key](key, value)
        elif key in _LIST_CHECKS:
            vals = _float_list(key, value)
            if not vals:
                raise ConfigurationError(f"{key}: empty list")
            for v in vals:
                _LIST_CHECKS[key](key, v)
        elif key in _CHOICES and value not in _CHOICES[key]:
            raise ConfigurationError(f"{key}={value!r}: expected one of {_CHOICES[key]}")
    if "weight_prob" in merged and not 0 <= merged["weight_prob"] <= 1:
        raise ConfigurationError(f"weight_prob={merged['weight_prob']} out of range: must lie in [0, 1]")
    return merged


def weights_from_settings(s: Mapping) -> object:
    kind = s.get("weights", "iid")
    if kind == "critical":
        return Scheduled.critical_tail(s["T"], s["critical_len"], s["ordinary_weight"], s["critical_weight"])
    if kind == "constant":
        return Constant(s["ordinary_weight"])
    return TwoPointIid(s["weight_low"], s["weight_high"], s["weight_prob"])


def parse_config(source=None, overrides: Mapping[str, object] | None = None) -> ScenarioConfig:
    """Resolved single-run scenario; with no input this is the sample-path setup."""
    s = resolve_settings(SCENARIO_DEFAULTS, source, overrides)
    weights = weights_from_settings(s)
    crit = None
    if s["weights"] == "critical":
        n = min(s["critical_len"], s["T"])
        crit = (s["T"] - n, s["T"] - 1)
    return ScenarioConfig(horizon=s["T"], seed=s["seed"], increments=IncrementProcess(s["sigma2"]),
                          weights=weights, channel=Channel(s["p"]),
                          policy=PolicySpec(s["policy"], period=s["period"]), rho=s["rho"], V=s["V"],
                          critical_period=crit, batches=s["batches"])
