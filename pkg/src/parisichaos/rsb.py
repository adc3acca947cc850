"""Discrete RSB triplets and the Parisi functional via the A_p recursion.

Each A_p is tabulated on a uniform x-grid together with its first two
derivatives. One step of the recursion is

    A_p(x) = (1/m_p) log E exp(m_p A_{p+1}(x + z_p)),  Var z_p = xi'(q_{p+1}) - xi'(q_p),

evaluated with Gauss-Hermite nodes in z_p and cubic Hermite interpolation
of A_{p+1}. Derivatives are obtained by differentiating under the
expectation (tilted averages of A'_{p+1} and A''_{p+1}), never by finite
differences.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidArgumentError, NumericalFailure
from .grid import GridConfig, GridFunction
from .mixture import MixtureSpec
from .quadrature import gauss_hermite

M_ZERO = 1e-8
_ORDER_TOL = 1e-12


@dataclass(frozen=True)
class FieldSpec:
    """External field: a constant ``h`` or a Gaussian ``N(mean, sd^2)``."""

    kind: str = "constant"
    h: float = 0.0
    mean: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian"):
            raise InvalidArgumentError(f"unknown field kind {self.kind!r}")
        if self.sd < 0:
            raise InvalidArgumentError("field sd must be >= 0")

    @classmethod
    def constant(cls, h: float) -> "FieldSpec":
        return cls("constant", h=float(h))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "FieldSpec":
        return cls("gaussian", mean=float(mean), sd=float(sd))

    @property
    def center(self) -> float:
        return self.h if self.kind == "constant" else self.mean

    @property
    def is_random(self) -> bool:
        return self.kind == "gaussian" and self.sd > 0

    def second_moment(self) -> float:
        if self.kind == "constant":
            return self.h**2
        return self.mean**2 + self.sd**2

    @property
    def chaos_hypotheses_met(self) -> bool:
        return self.second_moment() > 0

    def extent(self) -> float:
        if self.kind == "constant":
            return abs(self.h)
        return abs(self.mean) + 5.0 * self.sd

    def rule(self, n: int):
        if not self.is_random:
            return np.array([self.center]), np.array([1.0])
        z, w = gauss_hermite(n)
        return self.mean + self.sd * z, w

    def sample(self, rng, size):
        if not self.is_random:
            return np.full(size, self.center)
        return rng.normal(self.mean, self.sd, size)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "h": self.h}
        return {"kind": "gaussian", "mean": self.mean, "sd": self.sd}

    @classmethod
    def from_dict(cls, d) -> "FieldSpec":
        kind = d.get("kind", "constant")
        if kind == "constant":
            return cls.constant(d.get("h", 0.0))
        return cls.gaussian(d.get("mean", 0.0), d.get("sd", 0.0))


@dataclass(frozen=True)
class RSBParams:
    """Triplet (k, m, q) with m = (m_0..m_{k+1}) and q = (q_0..q_{k+2})."""

    m: tuple
    q: tuple

    def __post_init__(self):
        m = tuple(float(v) for v in self.m)
        q = tuple(float(v) for v in self.q)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "q", q)
        if len(q) != len(m) + 1 or len(m) < 2:
            raise InvalidArgumentError(
                f"need len(m) = k + 2 >= 2 and len(q) = k + 3; got {len(m)}, {len(q)}"
            )
        if m[0] != 0.0 or m[-1] != 1.0 or q[0] != 0.0 or q[-1] != 1.0:
            raise InvalidArgumentError("require m_0 = 0, m_{k+1} = 1, q_0 = 0, q_{k+2} = 1")
        if np.any(np.diff(m) < -_ORDER_TOL) or np.any(np.diff(q) < -_ORDER_TOL):
            raise InvalidArgumentError(f"m and q must be nondecreasing: m={m}, q={q}")

    @property
    def k(self) -> int:
        return len(self.m) - 2

    @classmethod
    def replica_symmetric(cls, q1: float) -> "RSBParams":
        return cls((0.0, 1.0), (0.0, float(q1), 1.0))

    @classmethod
    def from_atoms(cls, atoms) -> "RSBParams":
        """Build from ``[(q, mass), ...]``; masses are renormalized to 1."""
        atoms = sorted((float(a), float(b)) for a, b in atoms)
        if not atoms:
            raise InvalidArgumentError("need at least one atom")
        masses = np.array([b for _, b in atoms])
        if np.any(masses < 0) or masses.sum() <= 0:
            raise InvalidArgumentError("atom masses must be >= 0 with positive total")
        cum = np.cumsum(masses) / masses.sum()
        cum[-1] = 1.0
        m = (0.0, *np.minimum(cum, 1.0).tolist())
        q = (0.0, *(min(max(a, 0.0), 1.0) for a, _ in atoms), 1.0)
        return cls(m, q)

    def atoms(self):
        """``[(q_p, m_p - m_{p-1})]`` for p = 1..k+1."""
        return [(self.q[p], self.m[p] - self.m[p - 1]) for p in range(1, self.k + 2)]

    def variances(self, spec: MixtureSpec) -> np.ndarray:
        """Var z_p = xi'(q_{p+1}) - xi'(q_p) for p = 0..k+1."""
        d = np.diff(spec.xi(np.asarray(self.q), 1))
        return np.maximum(d, 0.0)

    def effective_m(self) -> np.ndarray:
        m = np.asarray(self.m)
        return np.where(m < M_ZERO, 0.0, m)

    def theta_term(self, spec: MixtureSpec) -> float:
        """(1/2) sum_{p=1}^{k+1} m_p (theta(q_{p+1}) - theta(q_p))."""
        th = np.diff(spec.theta(np.asarray(self.q)))
        return 0.5 * float(np.dot(np.asarray(self.m)[1:], th[1:]))

    def to_dict(self):
        return {"k": self.k, "m": list(self.m), "q": list(self.q)}

    @classmethod
    def from_dict(cls, d) -> "RSBParams":
        r = cls(tuple(d["m"]), tuple(d["q"]))
        if "k" in d and int(d["k"]) != r.k:
            raise InvalidArgumentError(f"k={d['k']} inconsistent with m/q lengths")
        return r

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RSBParams":
        return cls.from_dict(json.loads(text))


# -- level functions ---------------------------------------------------------


class LogCosh:
    """Terminal condition log cosh x with exact derivatives."""

    def __call__(self, pts, nderiv=2):
        ax = np.abs(pts)
        e = np.exp(-2.0 * ax)
        out = [ax + np.log1p(e) - np.log(2.0)]
        if nderiv >= 1:
            out.append(np.tanh(pts))
        if nderiv >= 2:
            out.append(4.0 * e / (1.0 + e) ** 2)
        return tuple(out)


class TabulatedLevel:
    """A function and its first derivatives on a uniform grid.

    The value is extended with slopes -1/+1 (asymptote |x| + const), the
    derivatives are extended as constants.
    """

    def __init__(self, x_lo, x_hi, val, d1, d2=None):
        self.f0 = GridFunction(x_lo, x_hi, val, -1.0, 1.0, derivs=d1)
        self.f1 = GridFunction(x_lo, x_hi, d1, 0.0, 0.0, derivs=d2)
        self.f2 = None if d2 is None else GridFunction(x_lo, x_hi, d2, 0.0, 0.0)

    def __call__(self, pts, nderiv=2):
        pts = np.asarray(pts, dtype=float)
        where = self.f0.locate(pts)
        out = [self.f0(pts, where)]
        if nderiv >= 1:
            out.append(self.f1(pts, where))
        if nderiv >= 2:
            if self.f2 is None:
                raise InvalidArgumentError("second derivative not tabulated")
            out.append(self.f2(pts, where))
        return tuple(out)

    def node_values(self):
        return self.f0.values, self.f1.values, None if self.f2 is None else self.f2.values


MAX_STEP_SD = 0.9


def smooth_step(fn, x, sd, m, n_quad, nderiv=2):
    """(1/m) log E exp(m fn(x + sd Z)) and its x-derivatives.

    ``m == 0`` means the plain expectation E fn(x + sd Z).
    """
    x = np.asarray(x, dtype=float)
    if sd <= 0.0:
        return fn(x, nderiv)
    z, w = gauss_hermite(n_quad)
    pts = x[..., None] + sd * z
    vals = fn(pts, nderiv)
    if m == 0.0:
        return tuple(v @ w for v in vals)
    ma = m * vals[0]
    shift = ma.max(axis=-1, keepdims=True)
    e = np.exp(ma - shift) * w
    s = e.sum(axis=-1)
    out = [(shift[..., 0] + np.log(s)) / m]
    if nderiv >= 1:
        pw = e / s[..., None]
        d1 = np.einsum("...j,...j->...", pw, vals[1])
        out.append(d1)
        if nderiv >= 2:
            d2 = np.einsum("...j,...j->...", pw, vals[2] + m * vals[1] ** 2) - m * d1**2
            out.append(d2)
    return tuple(out)


def _checked(arrs, level):
    for a in arrs:
        if a is not None and not np.all(np.isfinite(a)):
            raise NumericalFailure(f"non-finite values in recursion at level {level}", level=level)
    return arrs


def _resolve(spec, field, grid_cfg):
    spec.check()
    field = field or FieldSpec()
    grid_cfg = (grid_cfg or GridConfig()).resolve(spec, field)
    return spec, field, grid_cfg


def recursion_levels(spec, variances, ms, grid_cfg, nderiv=2, stop=1, terminal=None):
    """Run the backward recursion on the grid.

    ``variances[p]`` and ``ms[p]`` describe step p (p = 0..L-1); the
    terminal function is level L. Returns a list indexed by level with
    ``None`` below ``stop``.
    """
    L = len(variances)
    x = grid_cfg.x_grid()
    levels = [None] * (L + 1)
    levels[L] = terminal if terminal is not None else LogCosh()
    for p in range(L - 1, stop - 1, -1):
        # wide steps lose Gauss-Hermite accuracy; the step is a semigroup in
        # the variance, so split it into equal pieces of sd <= MAX_STEP_SD
        n_sub, sd = substeps(variances[p])
        levels[p] = _grid_steps(levels[p + 1], x, sd, float(ms[p]), grid_cfg.n_quad, nderiv, n_sub, p)
    return levels


def substeps(variance):
    """Number of equal-variance pieces for one step, and the sd of each."""
    n_sub = max(1, int(np.ceil(variance / MAX_STEP_SD**2 - 1e-12)))
    return n_sub, float(np.sqrt(variance / n_sub))


def _grid_steps(fn, x, sd, m, n_quad, nderiv, n_steps, level):
    for _ in range(n_steps):
        vals = _checked(smooth_step(fn, x, sd, m, n_quad, nderiv), level)
        fn = TabulatedLevel(x[0], x[-1], vals[0], vals[1], vals[2] if len(vals) > 2 else None)
    return fn


class AFamily:
    """Tabulated A_0..A_{k+2} for one RSB triplet (immutable after build)."""

    def __init__(self, spec, rsb, grid_cfg, levels):
        self.spec = spec
        self.rsb = rsb
        self.grid_cfg = grid_cfg
        self.levels = levels
        self.variances = rsb.variances(spec)
        self.m_eff = rsb.effective_m()

    @property
    def x(self):
        return self.grid_cfg.x_grid()

    def __call__(self, p, x, order=0):
        """A_p^{(order)}(x) for order 0..2."""
        if not 0 <= p <= self.rsb.k + 2:
            raise InvalidArgumentError(f"level {p} out of range 0..{self.rsb.k + 2}")
        if order not in (0, 1, 2):
            raise InvalidArgumentError("order must be 0, 1 or 2")
        return self.levels[p](np.asarray(x, dtype=float), order)[order]

    def node_values(self, p):
        """(A_p, A_p', A_p'') at the grid nodes."""
        lev = self.levels[p]
        if isinstance(lev, LogCosh):
            return lev(self.x, 2)
        return lev.node_values()

    def x0(self, field) -> float:
        """X_0 = E A_0(h)."""
        hs, hw = field.rule(self.grid_cfg.n_quad_h)
        return float(np.dot(self(0, hs), hw))

    def functional(self, field) -> float:
        return np.log(2.0) + self.x0(field) - self.rsb.theta_term(self.spec)

    def to_csv(self, path):
        cols = [self.node_values(p)[0] for p in range(self.rsb.k + 3)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x"] + [f"A_{p}" for p in range(len(cols))])
            for i, xv in enumerate(self.x):
                w.writerow([repr(float(xv))] + [repr(float(c[i])) for c in cols])


def build_a_functions(spec: MixtureSpec, rsb: RSBParams, grid_cfg=None, field=None) -> AFamily:
    """Tabulate A_p for p = k+2 down to 0 (values and two derivatives)."""
    spec, field, grid_cfg = _resolve(spec, field, grid_cfg)
    levels = recursion_levels(spec, rsb.variances(spec), rsb.effective_m(), grid_cfg, nderiv=2, stop=0)
    return AFamily(spec, rsb, grid_cfg, levels)


def parisi_functional(spec, field, rsb, grid_cfg=None) -> float:
    """P_k(m, q) = log 2 + E A_0(h) - (1/2) sum m_p (theta(q_{p+1}) - theta(q_p))."""
    spec, field, grid_cfg = _resolve(spec, field, grid_cfg)
    var = rsb.variances(spec)
    ms = rsb.effective_m()
    levels = recursion_levels(spec, var, ms, grid_cfg, nderiv=1, stop=1)
    hs, hw = field.rule(grid_cfg.n_quad_h)
    n_sub, sd = substeps(var[0])
    fn = _grid_steps(levels[1], grid_cfg.x_grid(), sd, 0.0, grid_cfg.n_quad, 1, n_sub - 1, 0)
    (a0,) = smooth_step(fn, hs, sd, 0.0, grid_cfg.n_quad, 0)
    _checked((a0,), 0)
    return float(np.log(2.0) + np.dot(a0, hw) - rsb.theta_term(spec))


def insert_atom(rsb: RSBParams, q_star: float) -> RSBParams:
    """Insert ``q_star`` into q with a zero-mass atom; the functional is unchanged."""
    q_star = float(q_star)
    if not 0.0 <= q_star <= 1.0:
        raise InvalidArgumentError(f"q_star must lie in [0, 1], got {q_star}")
    q, m = list(rsb.q), list(rsb.m)
    tau = next(t for t in range(1, len(q)) if q[t - 1] <= q_star <= q[t])
    new_q = q[:tau] + [q_star] + q[tau:]
    new_m = m[:tau] + [m[tau - 1]] + m[tau:]
    return RSBParams(tuple(new_m), tuple(new_q))


def insertion_index(rsb: RSBParams, q_star: float) -> int:
    """Index tau with q_{tau-1} <= q_star <= q_tau used by :func:`insert_atom`."""
    return next(t for t in range(1, len(rsb.q)) if rsb.q[t - 1] <= q_star <= rsb.q[t])


def tilted_moment(family: AFamily, field, p: int, deriv_order: int = 1) -> float:
    """E(W_1 ... W_{p-1} A_p^{(d)}(zeta_p)^2) with zeta_p = h + sum_{n<p} z_n.

    The tilted expectation is computed backwards: G_p = (A_p^{(d)})^2 and
    G_j(x) = E[W_j G_{j+1}(x + z_j)] where W_j is the normalized
    exp(m_j A_{j+1}) weight, then G_0 = E G_1(x + z_0) and the result is
    E_h G_0(h).
    """
    k = family.rsb.k
    if not 1 <= p <= k + 1:
        raise InvalidArgumentError(f"p must lie in 1..{k + 1}, got {p}")
    if deriv_order not in (1, 2):
        raise InvalidArgumentError("deriv_order must be 1 or 2")
    cfg = family.grid_cfg
    x = family.x
    z, w = gauss_hermite(cfg.n_quad)
    g = family.node_values(p)[deriv_order] ** 2
    for j in range(p - 1, 0, -1):
        sd = float(np.sqrt(family.variances[j]))
        if sd == 0.0:
            continue
        gf = GridFunction(x[0], x[-1], g, 0.0, 0.0)
        pts = x[:, None] + sd * z
        mj = family.m_eff[j]
        if mj == 0.0:
            pw = np.broadcast_to(w, pts.shape)
        else:
            a = mj * family(j + 1, pts)
            e = np.exp(a - a.max(axis=1, keepdims=True)) * w
            pw = e / e.sum(axis=1, keepdims=True)
        g = np.sum(pw * gf(pts), axis=1)
    gf = GridFunction(x[0], x[-1], g, 0.0, 0.0)
    hs, hw = field.rule(cfg.n_quad_h)
    sd0 = float(np.sqrt(family.variances[0]))
    g0 = gf(hs[:, None] + sd0 * z) @ w
    return float(np.dot(g0, hw))


def stationarity_residuals(family: AFamily, field) -> np.ndarray:
    """tilted_moment(p, 1) - q_p for p = 1..k+1."""
    k = family.rsb.k
    return np.array(
        [tilted_moment(family, field, p, 1) - family.rsb.q[p] for p in range(1, k + 2)]
    )


def second_moment_products(family: AFamily, field) -> np.ndarray:
    """xi''(q_p) * tilted_moment(p, 2) for p = 1..k+1."""
    k = family.rsb.k
    return np.array(
        [
            family.spec.xi(family.rsb.q[p], 2) * tilted_moment(family, field, p, 2)
            for p in range(1, k + 2)
        ]
    )
