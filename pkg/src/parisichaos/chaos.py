"""Disorder chaos: phi_v(u, t), the root u_t, the coupled Guerra bound and
the auxiliary functions F_eta.

The coupled recursion Y_p lives on a square (x1, x2) grid centred at the
field mean. Every Gaussian step is split into one-dimensional passes along
grid directions: the two axes, and the diagonal (1, eta) carrying the
correlated part. Each pass is a node-aligned discrete convolution, so
nothing is interpolated unless a step is narrower than 1.5 spacings.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError, NoBracketError, NumericalFailure
from .grid import GridConfig
from .quadrature import correlated_pairs, gauss_hermite, log_mean_exp
from .rsb import FieldSpec, LogCosh, RSBParams, insert_atom, recursion_levels

_EPS_Q = 1e-13
MIN_SD_SPACINGS = 1.5
FACTORIZATION_TOL = 1e-6


@dataclass(frozen=True)
class ChaosPoint:
    t: float
    u_t: float
    phi_at_c: float
    bisection_iters: int
    bracket_width: float

    def to_dict(self):
        return {
            "t": self.t,
            "u_t": self.u_t,
            "phi_at_c": self.phi_at_c,
            "bisection_iters": self.bisection_iters,
            "bracket_width": self.bracket_width,
        }


# -- phi_v and u_t -----------------------------------------------------------


def evaluate_phi_v(sol, spec, field, v: float, u: float, t: float, n_quad: int = 61) -> float:
    """E[d_x Phi(h+chi1, v) d_x Phi(h+chi2, v)] - u.

    chi_i = g sqrt(t xi'(u)) + g_i sqrt(xi'(v) - t xi'(u)), so the value is
    E_h E_g (E_g' d_x Phi(h + ...))^2 - u.
    """
    if not (0.0 <= u <= v + _EPS_Q and v < 1.0):
        raise InvalidArgumentError(f"need 0 <= u <= v < 1, got u={u}, v={v}")
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"t={t} outside [0, 1]")
    cp = sol.find(v)
    if cp is None:
        raise InvalidArgumentError(f"v={v} is not a stored checkpoint")
    field = field or FieldSpec()
    a = t * spec.xi(u, 1)
    b = spec.xi(v, 1) - a
    if b < -1e-12:
        raise InvalidArgumentError("t xi'(u) exceeds xi'(v)")
    sa, sb = np.sqrt(max(a, 0.0)), np.sqrt(max(b, 0.0))
    z, w = gauss_hermite(n_quad)
    hs, hw = field.rule(n_quad)
    pts = hs[:, None, None] + sa * z[None, :, None] + sb * z[None, None, :]
    inner = cp.dphi(pts) @ w
    return float(((inner**2) @ w) @ hw - u)


def solve_u_t(sol, spec, field, c: float, t: float, tol: float = 1e-8, n_quad: int = 61) -> ChaosPoint:
    """Bisection for the root of u -> phi_c(u, t) on [0, c]."""
    if tol <= 0:
        raise InvalidArgumentError("tol must be > 0")
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"t={t} outside [0, 1]")
    f_lo = evaluate_phi_v(sol, spec, field, c, 0.0, t, n_quad)
    f_hi = evaluate_phi_v(sol, spec, field, c, c, t, n_quad)
    # at t = 1 phi_c(c, 1) = 0 identically, so the sign test is meaningless
    if t >= 1.0 or not (f_lo > 0.0 > f_hi):
        raise NoBracketError(
            f"no sign change on [0, {c}] at t={t}: phi(0)={f_lo:.3e}, phi(c)={f_hi:.3e}",
            f_lo=f_lo, f_hi=f_hi,
        )
    lo, hi = 0.0, float(c)
    iters = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if evaluate_phi_v(sol, spec, field, c, mid, t, n_quad) > 0.0:
            lo = mid
        else:
            hi = mid
        iters += 1
    return ChaosPoint(float(t), 0.5 * (lo + hi), f_hi, iters, hi - lo)


# -- coupled parameters ------------------------------------------------------


@dataclass(frozen=True)
class CoupledParams:
    kappa: int
    tau: int
    n: tuple
    rho: tuple
    u: float
    eta: int
    t: float
    lam: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if self.kappa < 1 or not 1 <= self.tau <= self.kappa:
            raise InvalidArgumentError("need kappa >= 1 and 1 <= tau <= kappa")
        if n.size != self.kappa + 1 or rho.size != self.kappa + 2:
            raise InvalidArgumentError("n needs kappa+1 entries and rho kappa+2")
        if n[0] != 0.0 or n[-1] != 1.0 or np.any(np.diff(n) < 0):
            raise InvalidArgumentError("need 0 = n_0 <= ... <= n_kappa = 1")
        if rho[0] != 0.0 or rho[-1] != 1.0 or np.any(np.diff(rho) < 0):
            raise InvalidArgumentError("need 0 = rho_0 <= ... <= rho_{kappa+1} = 1")
        if self.eta not in (1, -1):
            raise InvalidArgumentError("eta must be +1 or -1")
        if abs(rho[self.tau] - abs(self.u)) > _EPS_Q:
            raise InvalidArgumentError("rho_tau must equal |u|")
        if self.u != 0.0 and np.sign(self.u) != self.eta:
            raise InvalidArgumentError("u must equal eta |u|")
        if not 0.0 <= self.t <= 1.0:
            raise InvalidArgumentError("t must lie in [0, 1]")

    def with_lambda(self, lam: float) -> "CoupledParams":
        return replace(self, lam=float(lam))

    def variances(self, spec) -> np.ndarray:
        return np.maximum(np.diff(spec.xi(np.asarray(self.rho), 1)), 0.0)

    def correlations(self) -> np.ndarray:
        return np.array([self.eta * self.t if p < self.tau else 0.0 for p in range(self.kappa + 1)])

    def theta_term(self, spec) -> float:
        dth = np.diff(spec.theta(np.asarray(self.rho)))
        scale = np.where(np.arange(self.kappa + 1) < self.tau, 1.0 + self.t, 1.0)
        return float(np.sum(scale * np.asarray(self.n) * dth))

    def to_dict(self):
        return {
            "kappa": self.kappa, "tau": self.tau, "n": list(self.n), "rho": list(self.rho),
            "u": self.u, "eta": self.eta, "t": self.t, "lambda": self.lam,
        }


def _smallest_mass_atom(rsb: RSBParams, mass_tol: float) -> float:
    qs = [q for q, w in rsb.atoms() if w > mass_tol]
    if not qs:
        raise InvalidArgumentError("measure has no atom above mass_tol")
    return min(qs)


def standard_coupling(rsb: RSBParams, u: float, t: float, mode: str = "GB", lam: float = 0.0,
                      v: float | None = None, mass_tol: float = 1e-4) -> CoupledParams:
    """Coupled parameters built from one RSB triplet.

    ``mode="GB"``: |u| is inserted into q if absent, rho = q, n_p = m_p/(1+t)
    below tau and m_p from tau on. ``mode="chaos"``: tau = 1, n_0 = n_1 = 0,
    rho = (0, u, v, q_{a+1}, ..., 1) with q_a <= v < q_{a+1}; ``v`` defaults
    to the smallest atom carrying mass > ``mass_tol``.
    """
    if not -1.0 <= u <= 1.0:
        raise InvalidArgumentError("u must lie in [-1, 1]")
    eta = -1 if u < 0 else 1
    if mode == "GB":
        au = abs(u)
        k = rsb.k
        q = rsb.q
        tau = next((i for i in range(1, k + 2) if abs(q[i] - au) <= _EPS_Q), None)
        if tau is None:
            rsb = insert_atom(rsb, au)
            k, q = rsb.k, rsb.q
            tau = next(i for i in range(1, k + 2) if abs(q[i] - au) <= _EPS_Q)
        rho = list(q)
        rho[tau] = au
        n = [m / (1.0 + t) if p < tau else m for p, m in enumerate(rsb.m)]
        return CoupledParams(k + 1, tau, tuple(n), tuple(rho), float(u), eta, float(t), float(lam))
    if mode == "chaos":
        if v is None:
            v = _smallest_mass_atom(rsb, mass_tol)
        if not 0.0 <= u <= v < 1.0:
            raise InvalidArgumentError(f"chaos coupling needs 0 <= u <= v < 1 (u={u}, v={v})")
        k = rsb.k
        a = max(i for i in range(k + 2) if rsb.q[i] <= v + _EPS_Q)
        n = (0.0, 0.0) + tuple(rsb.m[a:])
        rho = (0.0, float(u), float(v)) + tuple(rsb.q[a + 1:])
        return CoupledParams(k + 3 - a, 1, n, rho, float(u), 1, float(t), float(lam))
    raise InvalidArgumentError(f"unknown coupling mode {mode!r}")


# -- two-dimensional recursion -----------------------------------------------


def _pad_linear(Y, K, dx):
    """Extend by K nodes on every side with unit slope away from the grid."""
    ramp = np.arange(1, K + 1) * dx
    Y = np.concatenate([Y[:1, :] + ramp[::-1, None], Y, Y[-1:, :] + ramp[:, None]], axis=0)
    return np.concatenate([Y[:, :1] + ramp[None, ::-1], Y, Y[:, -1:] + ramp[None, :]], axis=1)


def _pass(Y, dx, direction, sd, n, n_quad):
    """(1/n) log E exp(n Y(x + sd g d)) on the grid for a unit-step direction d."""
    if sd <= 0.0:
        return Y
    d1, d2 = direction
    size = Y.shape[0]
    if sd < MIN_SD_SPACINGS * dx:
        z, w = gauss_hermite(n_quad)
        P = int(np.ceil(sd * np.abs(z).max() / dx)) + 6
        coef = ndimage.spline_filter(_pad_linear(Y, P, dx), order=5, mode="nearest")
        idx = np.arange(size, dtype=float) + P
        I, J = np.meshgrid(idx, idx, indexing="ij")
        vals = np.stack([
            ndimage.map_coordinates(coef, [I + zj * sd / dx * d1, J + zj * sd / dx * d2],
                                    order=5, mode="nearest", prefilter=False)
            for zj in z
        ])
        if n == 0.0:
            return np.tensordot(w, vals, axes=1)
        acc = np.tensordot(w, np.exp(n * (vals - Y)), axes=1)
        return Y + np.log(acc) / n
    steep = abs(d1) + abs(d2)
    K = int(np.ceil((9.0 * sd + steep * n * sd * sd) / dx))
    ks = np.arange(-K, K + 1)
    kern = dx / sd * np.exp(-0.5 * (ks * dx / sd) ** 2) / np.sqrt(2.0 * np.pi)
    P = _pad_linear(Y, K, dx)
    acc = np.zeros_like(Y)
    for k, wk in zip(ks, kern):
        i0, j0 = K + k * d1, K + k * d2
        sl = P[i0:i0 + size, j0:j0 + size]
        acc += wk * (sl if n == 0.0 else np.exp(n * (sl - Y)))
    if n == 0.0:
        return acc
    return Y + np.log(acc) / n


def _gaussian_step(Y, dx, var, corr, n, n_quad):
    """One level: covariance var * [[1, corr], [corr, 1]], tilt n."""
    if var <= 0.0:
        return Y
    s = np.sqrt(var)
    r = abs(corr)
    if r > 0.0:
        Y = _pass(Y, dx, (1, int(np.sign(corr))), s * np.sqrt(r), n, n_quad)
    s_ind = s * np.sqrt(max(1.0 - r, 0.0))
    Y = _pass(Y, dx, (1, 0), s_ind, n, n_quad)
    return _pass(Y, dx, (0, 1), s_ind, n, n_quad)


def _grid2d(spec, field, grid_cfg):
    cfg = (grid_cfg or GridConfig()).resolve(spec, field)
    n2 = cfg.n_nodes_2d | 1  # odd, so the centre is a node
    hw = cfg.half_width_2d
    x = field.center + np.linspace(-hw, hw, n2)
    return cfg, x, x[1] - x[0]


def terminal_2d(x1, x2, lam):
    lc = LogCosh()
    return (lc(x1, 0)[0] + lc(x2, 0)[0]
            + np.log(np.cosh(lam) + np.tanh(x1) * np.tanh(x2) * np.sinh(lam)))


def _one_dim_levels(spec, params, cfg, stop, nderiv=1):
    return recursion_levels(spec, params.variances(spec), np.where(np.asarray(params.n) < 1e-8, 0.0, params.n),
                            cfg, nderiv=nderiv, stop=stop)


def guerra_report(spec, field, params: CoupledParams, grid_cfg=None, self_test: bool = True) -> dict:
    """alpha(lambda) with the 2-D recursion and the factorization self-test."""
    spec.check()
    field = field or FieldSpec()
    cfg, x, dx = _grid2d(spec, field, grid_cfg)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    Y = terminal_2d(X1, X2, params.lam)
    var = params.variances(spec)
    corr = params.correlations()
    n_eff = np.where(np.asarray(params.n) < 1e-8, 0.0, params.n)
    n_quad = min(cfg.n_quad, 31)
    gap = None
    for p in range(params.kappa, -1, -1):
        Y = _gaussian_step(Y, dx, var[p], corr[p], float(n_eff[p]), n_quad)
        if not np.all(np.isfinite(Y)):
            raise NumericalFailure(f"non-finite coupled recursion at level {p}", level=p)
        if p == params.tau and params.lam == 0.0 and self_test:
            gap = _factorization_gap(spec, params, cfg, x, Y)
            if gap > FACTORIZATION_TOL:
                raise NumericalFailure(f"factorization self-test failed: gap {gap:.2e}", level=p)
    if field.is_random:
        Y = _pass(Y, dx, (1, 1), field.sd, 0.0, n_quad)
    c = Y.shape[0] // 2
    y0 = float(Y[c, c])
    alpha = 2.0 * np.log(2.0) + y0 - params.lam * params.u - params.theta_term(spec)
    return {"alpha": float(alpha), "y0": y0, "factorization_gap": gap,
            "grid": cfg.to_dict(), "params": params.to_dict()}


def _factorization_gap(spec, params, cfg, x, Y):
    """At lambda = 0 and level tau, Y must equal D(x1) + D(x2)."""
    lev = _one_dim_levels(spec, params, cfg, params.tau, nderiv=1)[params.tau]
    d = lev(x, 0)[0]
    c = x.size // 2
    half = x.size // 4
    sl = slice(c - half, c + half + 1)
    return float(np.max(np.abs(Y[sl, sl] - (d[sl, None] + d[None, sl]))))


def guerra_bound(spec, field, params: CoupledParams, grid_cfg=None, self_test: bool = True) -> float:
    """Right side of the coupled interpolation bound, alpha(lambda)."""
    return guerra_report(spec, field, params, grid_cfg, self_test)["alpha"]


def guerra_zero_and_slope(spec, field, params: CoupledParams, grid_cfg=None):
    """alpha(0) and alpha'(0) through the one-dimensional D recursion.

    Requires n_p = 0 below tau, so the levels below tau are plain Gaussian
    and zeta_tau^1, zeta_tau^2 have variance xi'(rho_tau) and covariance
    eta t xi'(rho_tau).
    """
    if any(params.n[p] != 0.0 for p in range(params.tau)):
        raise InvalidArgumentError("need n_p = 0 for every p < tau")
    spec.check()
    field = field or FieldSpec()
    cfg = (grid_cfg or GridConfig()).resolve(spec, field)
    lev = _one_dim_levels(spec, params, cfg, params.tau, nderiv=1)[params.tau]
    sd = float(np.sqrt(spec.xi(params.rho[params.tau], 1)))
    y1, y2, w = correlated_pairs(cfg.n_quad, params.eta * params.t)
    hs, hw = field.rule(cfg.n_quad_h)
    z, wz = gauss_hermite(cfg.n_quad)
    ed = float((lev(hs[:, None] + sd * z, 0)[0] @ wz) @ hw)
    slope = float((lev(hs[:, None] + sd * y1, 1)[1] * lev(hs[:, None] + sd * y2, 1)[1]) @ w @ hw)
    alpha0 = 2.0 * np.log(2.0) + 2.0 * ed - params.theta_term(spec)
    return alpha0, slope - params.u


def chaos_bound(spec, field, params: CoupledParams, grid_cfg=None) -> float:
    """alpha(0) - alpha'(0)^2 / 2."""
    a0, s0 = guerra_zero_and_slope(spec, field, params, grid_cfg)
    return a0 - 0.5 * s0 * s0


# -- F_eta and the coupled inequalities ----------------------------------------


def f_eta(x1, x2, w: float, t: float, eta: int = 1, n_quad: int = 61):
    """F_eta(x1, x2, w) with (y1, y2) standard, correlation t."""
    if w < 0:
        raise InvalidArgumentError("w must be >= 0")
    if eta not in (1, -1):
        raise InvalidArgumentError("eta must be +1 or -1")
    y1, y2, ww = correlated_pairs(n_quad, t)
    x1 = np.asarray(x1, dtype=float)[..., None]
    x2 = np.asarray(x2, dtype=float)[..., None]
    sw = np.sqrt(w)
    d = np.tanh(x1 + y1 * sw) + (-1.0 if eta == 1 else 1.0) * np.tanh(x2 + eta * y2 * sw)
    return (d * d) @ ww


def subadditivity_margin(f1, f2, x1, x2, var, m, t, eta, n_quad=41):
    """RHS - LHS of the coupled log-E-exp inequality for one sample."""
    y1, y2, w = correlated_pairs(n_quad, eta * t)
    s = np.sqrt(var)
    a = f1(x1 + s * y1) + f2(x2 + s * y2)
    lhs = (1.0 + t) / m * log_mean_exp(m / (1.0 + t) * a, w)
    z, wz = gauss_hermite(n_quad)
    rhs = (log_mean_exp(m * f1(x1 + s * z), wz) + log_mean_exp(m * f2(x2 + s * z), wz)) / m
    return float(rhs - lhs)


def verify_subadditivity(family, p: int, t: float, samples: int = 500, seed: int = 0,
                         x_range: float = 5.0, n_quad: int = 41) -> float:
    """Worst margin of the inequality with F1 = F2 = A_{p+1}.

    The Gaussian variance is that of level p (or xi'(1)/2 for an empty
    level); x1, x2, m and eta are drawn at random.
    """
    if not 0 <= p <= family.rsb.k + 1:
        raise InvalidArgumentError("level out of range")
    rng = np.random.default_rng([seed, p])
    var = float(family.variances[p])
    if var <= 0.0:
        var = 0.5 * family.spec.xi1_at_one

    def fn(pts):
        return family(p + 1, pts)

    worst = np.inf
    for _ in range(samples):
        x1, x2 = rng.uniform(-x_range, x_range, 2)
        m = rng.uniform(0.05, 1.0)
        eta = 1 if rng.random() < 0.5 else -1
        worst = min(worst, subadditivity_margin(fn, fn, x1, x2, var, m, t, eta, n_quad))
    return float(worst)
