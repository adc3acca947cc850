"""Uniform x-grids, tabulated functions with linear tails, and defaults."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError

DEFAULT_NODES = 2049
DEFAULT_QUAD = 61
DEFAULT_NODES_2D = 257


@dataclass(frozen=True)
class GridConfig:
    """Discretization settings; ``half_width=None`` means the model default."""

    half_width: float | None = None
    n_nodes: int = DEFAULT_NODES
    n_quad: int = DEFAULT_QUAD
    n_quad_h: int = DEFAULT_QUAD
    n_nodes_2d: int = DEFAULT_NODES_2D
    half_width_2d: float | None = None

    def __post_init__(self):
        if self.n_nodes < 3 or self.n_nodes_2d < 3:
            raise InvalidArgumentError("grids need at least 3 nodes")
        if self.n_quad < 2 or self.n_quad_h < 1:
            raise InvalidArgumentError("quadrature needs at least 2 nodes")

    def resolve(self, spec, field) -> "GridConfig":
        """Fill in model-dependent half-widths."""
        xi1 = spec.xi1_at_one
        hw = self.half_width
        if hw is None:
            hw = 8.0 + 6.0 * np.sqrt(xi1) + field.extent()
        hw2 = self.half_width_2d
        if hw2 is None:
            hw2 = 8.0 + 4.0 * np.sqrt(xi1) + field.extent()
        return replace(self, half_width=float(hw), half_width_2d=float(hw2))

    def x_grid(self) -> np.ndarray:
        if self.half_width is None:
            raise InvalidArgumentError("GridConfig not resolved")
        return np.linspace(-self.half_width, self.half_width, self.n_nodes)

    def to_dict(self):
        return {
            "half_width": self.half_width,
            "n_nodes": self.n_nodes,
            "n_quad": self.n_quad,
            "n_quad_h": self.n_quad_h,
            "n_nodes_2d": self.n_nodes_2d,
            "half_width_2d": self.half_width_2d,
        }


class GridFunction:
    """Function tabulated on a uniform grid.

    Between nodes it is cubic Hermite, using ``derivs`` (exact first
    derivatives at the nodes) when supplied and cubic-spline node slopes
    otherwise. Outside ``[x_lo, x_hi]`` it is extended linearly with
    the stored tail slopes, starting from the edge values.
    """

    def __init__(self, x_lo, x_hi, values, slope_lo=0.0, slope_hi=0.0, derivs=None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise InvalidArgumentError("GridFunction needs >= 3 values")
        if not x_lo < x_hi:
            raise InvalidArgumentError("x_lo must be < x_hi")
        self.x_lo = float(x_lo)
        self.x_hi = float(x_hi)
        self.values = values
        self.slope_lo = float(slope_lo)
        self.slope_hi = float(slope_hi)
        self.derivs = None if derivs is None else np.asarray(derivs, dtype=float)
        self._spline_d = None
        self._poly = None

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n)

    def _node_slopes(self):
        if self.derivs is not None:
            return self.derivs
        if self._spline_d is None:
            from scipy.interpolate import CubicSpline

            cs = CubicSpline(self.x, self.values)
            self._spline_d = cs(self.x, 1)
        return self._spline_d

    def _coeffs(self):
        # per-interval cubic a + b t + c t^2 + d t^3 (Hermite form, Horner-ready)
        if self._poly is None:
            v, h = self.values, self.dx
            hd = h * self._node_slopes()
            dv = v[1:] - v[:-1]
            self._poly = (
                v[:-1],
                hd[:-1],
                3.0 * dv - 2.0 * hd[:-1] - hd[1:],
                -2.0 * dv + hd[:-1] + hd[1:],
            )
        return self._poly

    def locate(self, pts):
        """Interval index and local coordinate of each point (shared by same-grid functions)."""
        s = (pts - self.x_lo) / self.dx
        i = np.clip(s.astype(np.int64), 0, self.n - 2)
        return i, np.clip(s - i, 0.0, 1.0)

    def __call__(self, pts, where=None):
        pts = np.asarray(pts, dtype=float)
        a, b, c, d = self._coeffs()
        i, t = self.locate(pts) if where is None else where
        out = a[i] + t * (b[i] + t * (c[i] + t * d[i]))
        lo = pts < self.x_lo
        hi = pts > self.x_hi
        if lo.any():
            out = np.where(lo, self.values[0] + self.slope_lo * (pts - self.x_lo), out)
        if hi.any():
            out = np.where(hi, self.values[-1] + self.slope_hi * (pts - self.x_hi), out)
        return out

    def is_even(self, tol: float) -> bool:
        return bool(np.max(np.abs(self.values - self.values[::-1])) <= tol)

    def extended(self, pad: int) -> np.ndarray:
        """Node values on the grid padded by ``pad`` nodes using the tails."""
        j = np.arange(1, pad + 1) * self.dx
        left = self.values[0] - self.slope_lo * j[::-1]
        right = self.values[-1] + self.slope_hi * j
        return np.concatenate([left, self.values, right])
