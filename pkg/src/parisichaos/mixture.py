"""Even polynomial mixture functions xi(x) = sum_p beta_p^2 x^p."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidArgumentError


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture ``xi(x) = sum_p w_p x^p`` given as ``(power, weight)`` pairs.

    Construction never raises; call :func:`validate_mixture` (or
    :meth:`check`) before using a spec built from untrusted input.
    """

    coeffs: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self, "coeffs", tuple((int(p), float(w)) for p, w in self.coeffs)
        )

    @classmethod
    def sk(cls, beta: float) -> "MixtureSpec":
        """Classic SK convention xi(x) = beta^2 x^2 / 2."""
        return cls(((2, beta * beta / 2.0),))

    @classmethod
    def from_pairs(cls, pairs) -> "MixtureSpec":
        out = []
        for item in pairs:
            if isinstance(item, dict):
                try:
                    out.append((item["power"], item["weight"]))
                except KeyError as exc:
                    raise ConfigError(f"mixture entry {item!r} missing {exc}") from None
            else:
                out.append(tuple(item))
        return cls(tuple(out))

    def to_pairs(self):
        return [{"power": p, "weight": w} for p, w in self.coeffs]

    def check(self) -> "MixtureSpec":
        report = validate_mixture(self)
        if not report.valid:
            raise InvalidArgumentError("invalid mixture: " + "; ".join(report.violations))
        return self

    def xi(self, x, order: int = 0):
        return xi_eval(self, x, order)

    def theta(self, x):
        return theta_eval(self, x)

    @property
    def xi1_at_one(self) -> float:
        return float(xi_eval(self, 1.0, 1))


def validate_mixture(spec: MixtureSpec) -> ValidationReport:
    problems = []
    for p, w in spec.coeffs:
        if p < 2 or p % 2:
            problems.append(f"power {p} must be an even integer >= 2")
        if not np.isfinite(w) or w < 0:
            problems.append(f"weight {w} for power {p} must be finite and >= 0")
    if not any(w > 0 for _, w in spec.coeffs if np.isfinite(w)):
        problems.append("at least one weight must be strictly positive")
    return ValidationReport(not problems, tuple(problems))


def xi_eval(spec: MixtureSpec, x, order: int = 0):
    """Derivative of order 0..3 of xi at ``x`` (scalar or array)."""
    if order not in (0, 1, 2, 3):
        raise InvalidArgumentError(f"order must be in 0..3, got {order}")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p, w in spec.coeffs:
        if p < order:
            continue
        fall = 1.0
        for j in range(order):
            fall *= p - j
        out = out + w * fall * x ** (p - order)
    return out if out.ndim else float(out)


def theta_eval(spec: MixtureSpec, x):
    """theta(x) = x xi'(x) - xi(x) = sum_p (p - 1) w_p x^p."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p, w in spec.coeffs:
        out = out + (p - 1) * w * x**p
    return out if out.ndim else float(out)


_PRESET = re.compile(r"^\s*sk\s*:\s*(.*)$", re.IGNORECASE)


def parse_preset(text: str):
    """Parse ``sk:beta=<float>[,h=<float>]`` into ``(MixtureSpec, h or None)``."""
    m = _PRESET.match(text)
    if not m:
        raise ConfigError(f"unknown preset {text!r}; expected 'sk:beta=<float>[,h=<float>]'")
    values = {}
    for part in filter(None, (s.strip() for s in m.group(1).split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"preset field {part!r} is not key=value")
        try:
            values[key.strip().lower()] = float(val)
        except ValueError:
            raise ConfigError(f"preset field {key!r} is not a number: {val!r}") from None
    if "beta" not in values:
        raise ConfigError("preset requires beta=<float>")
    unknown = set(values) - {"beta", "h"}
    if unknown:
        raise ConfigError(f"unknown preset fields: {sorted(unknown)}")
    return MixtureSpec.sk(values["beta"]), values.get("h")
