"""Parisi PDE for an atomic measure, solved exactly interval by interval.

On an interval where mu([0, q]) equals the constant m, exp(m Phi(., q)) is
the heat flow of exp(m Phi(., q')) with variance xi'(q') - xi'(q) (m = 0:
Phi itself flows). Each flow step is a discrete Gaussian convolution over
grid nodes (trapezoid rule, exponentially accurate for analytic data) so
no interpolation enters; steps narrower than 1.5 grid spacings fall back
to Gauss-Hermite with cubic interpolation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError, NumericalFailure
from .grid import GridConfig, GridFunction
from .rsb import FieldSpec, LogCosh, RSBParams, TabulatedLevel, smooth_step

_Q_TOL = 1e-13
MIN_SD_SPACINGS = 1.5


def heat_step(f, f1, f2, dx, sd, m, n_quad=61):
    """One exact flow step on node arrays ``(f, f', f'')``.

    Returns ``(g, g', g'')`` with g = (1/m) log E exp(m f(x + sd Z)).
    """
    if sd <= 0.0:
        return f.copy(), f1.copy(), f2.copy()
    n = f.size
    lo = -(n - 1) / 2 * dx
    if sd < MIN_SD_SPACINGS * dx:
        lev = TabulatedLevel(lo, -lo, f, f1, f2)
        return smooth_step(lev, np.linspace(lo, -lo, n), sd, m, n_quad, 2)
    K = int(np.ceil((9.0 * sd + m * sd * sd) / dx))
    y = np.arange(-K, K + 1) * dx
    kern = dx * np.exp(-0.5 * (y / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))
    ramp = np.arange(1, K + 1) * dx
    fe = np.concatenate([f[0] + ramp[::-1], f, f[-1] + ramp])
    f1e = np.concatenate([np.full(K, f1[0]), f1, np.full(K, f1[-1])])
    f2e = np.concatenate([np.full(K, f2[0]), f2, np.full(K, f2[-1])])
    fw = sliding_window_view(fe, 2 * K + 1)
    f1w = sliding_window_view(f1e, 2 * K + 1)
    f2w = sliding_window_view(f2e, 2 * K + 1)
    if m == 0.0:
        return fw @ kern, f1w @ kern, f2w @ kern
    e = np.exp(m * (fw - f[:, None])) * kern
    s = e.sum(axis=1)
    g = f + np.log(s) / m
    g1 = np.einsum("ij,ij->i", e, f1w) / s
    g2 = np.einsum("ij,ij->i", e, f2w + m * f1w * f1w) / s - m * g1 * g1
    return g, g1, g2


@dataclass(frozen=True)
class Checkpoint:
    q: float
    phi: GridFunction
    dphi: GridFunction
    d2phi: GridFunction


class PhiSolution:
    """Checkpoints of Phi(., q) and its x-derivatives for one measure."""

    def __init__(self, spec, measure, grid_cfg, checkpoints):
        self.spec = spec
        self.measure = measure
        self.grid_cfg = grid_cfg
        self.checkpoints = sorted(checkpoints, key=lambda c: c.q)

    @property
    def x(self):
        return self.grid_cfg.x_grid()

    @property
    def qs(self):
        return [c.q for c in self.checkpoints]

    def find(self, q):
        for c in self.checkpoints:
            if abs(c.q - q) <= _Q_TOL:
                return c
        return None

    def mass_below(self, q):
        """mu([0, q])."""
        return sum(b for a, b in self.measure.atoms() if a <= q + _Q_TOL)

    def _interval_m(self, q_lo, q_hi):
        """mu([0, q]) on [q_lo, q_hi), assumed free of atoms inside."""
        return self.mass_below(q_lo)

    def at(self, q) -> Checkpoint:
        """Checkpoint at ``q``; computed exactly from the next stored one above."""
        q = float(q)
        if not -_Q_TOL <= q <= 1.0 + _Q_TOL:
            raise InvalidArgumentError(f"q={q} outside [0, 1]")
        hit = self.find(q)
        if hit is not None:
            return hit
        above = min((c for c in self.checkpoints if c.q > q), key=lambda c: c.q)
        m = self._interval_m(q, above.q)
        if m < 1e-8:
            m = 0.0
        sd = float(np.sqrt(max(self.spec.xi(above.q, 1) - self.spec.xi(q, 1), 0.0)))
        f, f1, f2 = heat_step(
            above.phi.values, above.dphi.values, above.d2phi.values,
            above.phi.dx, sd, m, self.grid_cfg.n_quad,
        )
        return _make_checkpoint(q, self.x, f, f1, f2)

    def phi(self, x, q):
        return self.at(q).phi(np.asarray(x, dtype=float))

    def to_csv(self, path):
        x = self.x
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["q", "x", "phi", "dphi", "d2phi"])
            for c in self.checkpoints:
                for i, xv in enumerate(x):
                    w.writerow([repr(c.q), repr(float(xv)), repr(float(c.phi.values[i])),
                                repr(float(c.dphi.values[i])), repr(float(c.d2phi.values[i]))])


def _make_checkpoint(q, x, f, f1, f2):
    lo, hi = x[0], x[-1]
    return Checkpoint(
        q,
        GridFunction(lo, hi, f, -1.0, 1.0, derivs=f1),
        GridFunction(lo, hi, f1, 0.0, 0.0, derivs=f2),
        GridFunction(lo, hi, f2, 0.0, 0.0),
    )


def solve_phi(spec, measure: RSBParams, grid_cfg=None, q_checkpoints=(), field=None) -> PhiSolution:
    """Backward solve from Phi(x, 1) = log cosh x, recording checkpoints.

    Checkpoints are the requested ``q_checkpoints`` plus every atom of the
    measure (and q = 0, q = 1).
    """
    spec.check()
    field = field or FieldSpec()
    grid_cfg = (grid_cfg or GridConfig()).resolve(spec, field)
    req = [float(q) for q in q_checkpoints]
    if any(not 0.0 <= q <= 1.0 for q in req):
        raise InvalidArgumentError("checkpoints must lie in [0, 1]")
    qs = sorted(set(measure.q) | set(req), reverse=True)
    x = grid_cfg.x_grid()
    f, f1, f2 = LogCosh()(x, 2)
    sol = [_make_checkpoint(1.0, x, f, f1, f2)]
    atoms = measure.atoms()
    for q_hi, q_lo in zip(qs[:-1], qs[1:]):
        m = sum(b for a, b in atoms if a <= q_lo + _Q_TOL)
        m = 0.0 if m < 1e-8 else min(m, 1.0)
        sd = float(np.sqrt(max(spec.xi(q_hi, 1) - spec.xi(q_lo, 1), 0.0)))
        f, f1, f2 = heat_step(f, f1, f2, grid_cfg.x_grid()[1] - x[0], sd, m, grid_cfg.n_quad)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(f1)) and np.all(np.isfinite(f2))):
            raise NumericalFailure(f"non-finite Phi on [{q_lo}, {q_hi}]", level=(q_lo, q_hi))
        sol.append(_make_checkpoint(q_lo, x, f, f1, f2))
    return PhiSolution(spec, measure, grid_cfg, sol)


def phi_derivative(sol: PhiSolution, x, q, order: int = 1):
    """d^order Phi / dx^order at (x, q) for order 1 or 2.

    ``q`` need not be stored: the value is propagated exactly from the
    nearest checkpoint above, never interpolated in q.
    """
    if order not in (1, 2):
        raise InvalidArgumentError("order must be 1 or 2")
    c = sol.at(q)
    fn = c.dphi if order == 1 else c.d2phi
    return fn(np.asarray(x, dtype=float))


def consistency_check(sol: PhiSolution, family) -> dict:
    """Max gaps between Phi(., q_p) and A_p (values and first derivatives)."""
    r1, r2 = sol.measure, family.rsb
    if r1.k != r2.k or not (np.allclose(r1.m, r2.m, atol=1e-14) and np.allclose(r1.q, r2.q, atol=1e-14)):
        raise InvalidArgumentError("PhiSolution and AFamily were built from different triplets")
    x = sol.x
    same_grid = np.array_equal(x, family.x)
    per_level = []
    for p in range(r2.k + 3):
        c = sol.at(r2.q[p])
        if same_grid:
            a, a1, _ = family.node_values(p)
        else:
            a, a1 = family(p, x, 0), family(p, x, 1)
        per_level.append(
            (float(np.max(np.abs(c.phi.values - a))), float(np.max(np.abs(c.dphi.values - a1))))
        )
    return {
        "max_value_gap": max(v for v, _ in per_level),
        "max_deriv_gap": max(d for _, d in per_level),
        "per_level": per_level,
        "node_for_node": bool(same_grid),
    }


def cauchy_gap(sol_a: PhiSolution, sol_b: PhiSolution, q_values=None) -> dict:
    """max |Phi_a - Phi_b| and max |dPhi_a - dPhi_b| over a q-grid (diagnostic)."""
    if q_values is None:
        q_values = np.linspace(0.0, 1.0, 21)
    x = sol_a.x
    gv = gd = 0.0
    for q in q_values:
        ca, cb = sol_a.at(q), sol_b.at(q)
        gv = max(gv, float(np.max(np.abs(ca.phi(x) - cb.phi(x)))))
        gd = max(gd, float(np.max(np.abs(ca.dphi(x) - cb.dphi(x)))))
    return {"max_value_gap": gv, "max_deriv_gap": gd}
