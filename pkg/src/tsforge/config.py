"""Loading and validating JSON configuration files (automatic and manual modes)."""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Any, Union

from .errors import ConfigError, ParseError
from .params import GenerationParams, ManualAnomaly, ManualSpec
from .parser import parse_expression

MANUAL_KEYS = {
    "mode", "d", "equations", "anomalies", "train_length", "test_length",
    "propagation", "propagation_prob", "noise_sigma", "seed",
}
AUTOMATIC_KEYS = set(GenerationParams.field_names()) | {"mode"}


def _int(doc: dict, key: str, default=None, minimum: int = 1) -> int:
    value = doc.get(key, default)
    if value is None:
        raise ConfigError(key, "required")
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(key, f"must be an integer >= {minimum}, got {value!r}")
    return value


def _float(doc: dict, key: str, default: float) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"must be a number, got {value!r}")
    return float(value)


def _check_keys(doc: dict, allowed: set, mode: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(key, f"unknown field for {mode} mode")


def params_from_dict(doc: dict) -> GenerationParams:
    _check_keys(doc, AUTOMATIC_KEYS, "automatic")
    if "d" not in doc:
        raise ConfigError("d", "required")
    kwargs = {k: v for k, v in doc.items() if k != "mode"}
    for key in ("contamination_ratio", "propagation_prob", "noise_sigma"):
        if key in kwargs:
            kwargs[key] = _float(kwargs, key, 0.0)
    for key in ("link_communities", "enable_window_agg"):
        if key in kwargs and not isinstance(kwargs[key], bool):
            raise ConfigError(key, f"must be true or false, got {kwargs[key]!r}")
    return GenerationParams(**kwargs)


def manual_from_dict(doc: dict) -> ManualSpec:
    _check_keys(doc, MANUAL_KEYS, "manual")
    d = _int(doc, "d")
    equations = doc["equations"]
    if not isinstance(equations, list) or len(equations) != d:
        raise ConfigError("equations", f"expected a list of {d} equation strings")
    for j, text in enumerate(equations):
        if not isinstance(text, str):
            raise ConfigError(f"equations[{j}]", "must be a string")
        try:
            parse_expression(text, d)
        except ParseError as exc:
            raise ConfigError(f"equations[{j}]", f"x{j}: {exc}") from exc

    train_length = _int(doc, "train_length", 100)
    test_length = _int(doc, "test_length", 400)
    total = train_length + test_length

    anomalies = []
    windows: dict[int, list[tuple[int, int]]] = {}
    for k, entry in enumerate(doc.get("anomalies", [])):
        where = f"anomalies[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(where, "must be an object")
        unknown = set(entry) - {"var", "start", "end", "equation", "strategy"}
        if unknown:
            raise ConfigError(f"{where}.{sorted(unknown)[0]}", "unknown field")
        var = _int(entry, "var", minimum=0)
        if var >= d:
            raise ConfigError(f"{where}.var", f"{var} out of range for d={d}")
        start = _int(entry, "start", minimum=0)
        end = _int(entry, "end", minimum=0)
        if not train_length <= start < end <= total:
            raise ConfigError(
                where, f"window [{start}, {end}) must lie inside the test segment [{train_length}, {total})"
            )
        for a, b in windows.get(var, []):
            if start < b and a < end:
                raise ConfigError(where, f"overlaps window [{a}, {b}) on x{var}")
        windows.setdefault(var, []).append((start, end))
        text = entry.get("equation")
        if not isinstance(text, str):
            raise ConfigError(f"{where}.equation", "required string")
        try:
            parse_expression(text, d)
        except ParseError as exc:
            raise ConfigError(f"{where}.equation", str(exc)) from exc
        anomalies.append(ManualAnomaly(var, start, end, text, str(entry.get("strategy", "manual"))))

    propagation = []
    for k, entry in enumerate(doc.get("propagation", [])):
        where = f"propagation[{k}]"
        if not isinstance(entry, dict) or not isinstance(entry.get("propagates"), bool):
            raise ConfigError(where, "expected {src, dst, propagates: bool}")
        src = _int(entry, "src", minimum=0)
        dst = _int(entry, "dst", minimum=0)
        if src >= d or dst >= d:
            raise ConfigError(where, f"edge ({src}, {dst}) out of range for d={d}")
        propagation.append((src, dst, entry["propagates"]))

    prob = _float(doc, "propagation_prob", 0.5)
    if not 0.0 <= prob <= 1.0:
        raise ConfigError("propagation_prob", f"out of range [0, 1]: {prob}")
    noise = _float(doc, "noise_sigma", 0.0)
    if noise < 0:
        raise ConfigError("noise_sigma", f"must be >= 0, got {noise}")
    seed = _int(doc, "seed", 0, minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed", "must be below 2**64")
    return ManualSpec(
        d=d, equations=tuple(equations), anomalies=tuple(anomalies),
        train_length=train_length, test_length=test_length, propagation=tuple(propagation),
        propagation_prob=prob, noise_sigma=noise, seed=seed,
    )


def config_from_dict(doc: Any) -> Union[GenerationParams, ManualSpec]:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    mode = doc.get("mode")
    if mode not in (None, "automatic", "manual"):
        raise ConfigError("mode", f"expected 'automatic' or 'manual', got {mode!r}")
    if mode == "manual" or (mode is None and "equations" in doc):
        if "equations" not in doc:
            raise ConfigError("equations", "required in manual mode")
        return manual_from_dict(doc)
    return params_from_dict(doc)


def load_config(path: Union[str, Path]) -> Union[GenerationParams, ManualSpec]:
    """Read a config file; mode is manual iff it has an ``equations`` block."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def with_seed(config, seed: int):
    """Copy of ``config`` with its seed replaced."""
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", f"must be in [0, 2**64), got {seed}")
    return replace(config, seed=seed)
