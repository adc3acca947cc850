"""Small argument checks shared by the estimators and the CLI."""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, InvalidArgumentError


def check_finite(x, name: str) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{name} must be a number, got {x!r}") from None
    if not math.isfinite(v):
        raise InvalidArgumentError(f"{name} must be finite")
    return v


def check_interval(x, name: str, lo: float, hi: float) -> float:
    v = check_finite(x, name)
    if not lo <= v <= hi:
        raise InvalidArgumentError(f"{name}={v} outside [{lo}, {hi}]")
    return v


def check_positive(x, name: str) -> float:
    v = check_finite(x, name)
    if v <= 0:
        raise InvalidArgumentError(f"{name} must be > 0")
    return v


def check_int(x, name: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
        if isinstance(x, float) and x.is_integer():
            x = int(x)
        else:
            raise InvalidArgumentError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if lo is not None and x < lo or hi is not None and x > hi:
        raise InvalidArgumentError(f"{name}={x} outside [{lo}, {hi}]")
    return x


def check_grid(values, name: str, lo: float, hi: float) -> np.ndarray:
    """1-D float array with every entry in [lo, hi]."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < lo or arr.max() > hi):
        raise InvalidArgumentError(f"{name} entries must lie in [{lo}, {hi}]")
    return arr


def config_field(block: dict, key: str, kind, where: str, default=None, required=False):
    """Fetch ``block[key]`` with a ConfigError naming the offending field."""
    if key not in block:
        if required:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    val = block[key]
    try:
        if kind is float:
            return check_finite(val, f"{where}.{key}")
        if kind is int:
            return check_int(val, f"{where}.{key}")
        if kind is list and not isinstance(val, list):
            raise InvalidArgumentError(f"{where}.{key} must be a list")
        if kind is dict and not isinstance(val, dict):
            raise InvalidArgumentError(f"{where}.{key} must be an object")
        if kind is str and not isinstance(val, str):
            raise InvalidArgumentError(f"{where}.{key} must be a string")
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None
    return val
