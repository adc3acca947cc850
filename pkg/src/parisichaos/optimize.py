"""Minimization of the Parisi functional over ordered (m, q) and over k."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DegenerateMeasureError, InvalidArgumentError
from .grid import GridConfig
from .rsb import (
    FieldSpec,
    RSBParams,
    build_a_functions,
    insert_atom,
    parisi_functional,
    second_moment_products,
    stationarity_residuals,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerOptions:
    max_evals: int = 5000
    step_tol: float = 1e-7
    stationarity_tol: float = 1e-3
    n_restarts: int = 8
    seed: int = 0
    coarse_grid: GridConfig = dc_field(default_factory=lambda: GridConfig(n_nodes=257, n_quad=21))
    polish_grid: GridConfig = dc_field(default_factory=lambda: GridConfig(n_nodes=1025, n_quad=41))
    grid_cfg: GridConfig = dc_field(default_factory=GridConfig)
    merge_tol: float = 1e-4
    drop_mass: float = 1e-6
    prune_value_tol: float = 1e-8
    mass_tol: float = 1e-4

    def to_dict(self):
        return {
            "max_evals": self.max_evals,
            "step_tol": self.step_tol,
            "stationarity_tol": self.stationarity_tol,
            "n_restarts": self.n_restarts,
            "seed": self.seed,
            "coarse_grid": self.coarse_grid.to_dict(),
            "polish_grid": self.polish_grid.to_dict(),
            "grid_cfg": self.grid_cfg.to_dict(),
            "merge_tol": self.merge_tol,
            "drop_mass": self.drop_mass,
            "prune_value_tol": self.prune_value_tol,
            "mass_tol": self.mass_tol,
        }


@dataclass
class LevelResult:
    rsb: RSBParams
    value: float
    converged: bool
    n_evals: int
    residuals: np.ndarray


@dataclass
class ParisiMeasure:
    """Optimized discrete measure; ``c`` is its smallest support point."""

    rsb: RSBParams
    value: float
    c: float
    residuals: np.ndarray
    second_moments: np.ndarray
    k_history: list
    converged: bool
    global_certified: bool = False
    options: dict = dc_field(default_factory=dict)

    def atoms(self):
        return self.rsb.atoms()

    def to_dict(self):
        return {
            "value": self.value,
            "c": self.c,
            "atoms": [{"q": q, "mass": w} for q, w in self.rsb.atoms()],
            "rsb": self.rsb.to_dict(),
            "residuals": [float(r) for r in self.residuals],
            "second_moments": [float(r) for r in self.second_moments],
            "k_history": [[int(k), float(v)] for k, v in self.k_history],
            "converged": bool(self.converged),
            "global_certified": bool(self.global_certified),
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, d) -> "ParisiMeasure":
        rsb = RSBParams.from_dict(d["rsb"]) if "rsb" in d else RSBParams.from_atoms(
            [(a["q"], a["mass"]) for a in d["atoms"]]
        )
        return cls(
            rsb=rsb,
            value=float(d["value"]),
            c=float(d["c"]),
            residuals=np.asarray(d.get("residuals", []), dtype=float),
            second_moments=np.asarray(d.get("second_moments", []), dtype=float),
            k_history=[tuple(x) for x in d.get("k_history", [])],
            converged=bool(d.get("converged", False)),
            global_certified=bool(d.get("global_certified", False)),
            options=d.get("options", {}),
        )


# -- parametrization ---------------------------------------------------------


def _from_increments(sm, sq):
    dm = sm * sm
    dq = sq * sq
    if dm.sum() <= 0 or dq.sum() <= 0:
        return None
    m = np.concatenate([[0.0], np.cumsum(dm / dm.sum())])
    q = np.concatenate([[0.0], np.cumsum(dq / dq.sum())])
    m[-1] = 1.0
    q[-1] = 1.0
    return RSBParams(tuple(np.minimum(m, 1.0)), tuple(np.minimum(q, 1.0)))


def _to_increments(rsb: RSBParams):
    return np.sqrt(np.diff(rsb.m)), np.sqrt(np.diff(rsb.q))


class _Objective:
    def __init__(self, spec, field, grid_cfg):
        self.spec, self.field, self.grid_cfg = spec, field, grid_cfg
        self.n_evals = 0

    def rsb_value(self, rsb):
        self.n_evals += 1
        return parisi_functional(self.spec, self.field, rsb, self.grid_cfg)

    def __call__(self, s, k):
        rsb = _from_increments(s[: k + 1], s[k + 1 :])
        if rsb is None:
            return np.inf
        return self.rsb_value(rsb)


def _nelder_mead(obj, rsb, budget, xatol, fatol):
    k = rsb.k
    x0 = np.concatenate(_to_increments(rsb))
    simplex = [x0]
    for i in range(x0.size):
        y = x0.copy()
        y[i] = y[i] + 0.15 if abs(y[i]) < 0.05 else y[i] * 1.3
        simplex.append(y)
    res = minimize(
        obj, x0, args=(k,), method="Nelder-Mead",
        options={"maxfev": max(budget, 1), "xatol": xatol, "fatol": fatol,
                 "initial_simplex": np.array(simplex), "adaptive": True},
    )
    best = _from_increments(res.x[: k + 1], res.x[k + 1 :])
    return best, float(res.fun), bool(res.success)


def _coordinate_descent(obj, rsb, value, budget, step_tol, sweeps=40):
    m = np.array(rsb.m)
    q = np.array(rsb.q)
    k = rsb.k
    start = obj.n_evals
    last_step = np.inf
    for _ in range(sweeps):
        last_step = 0.0
        for kind, idx in [("q", i) for i in range(1, k + 2)] + [("m", i) for i in range(1, k + 1)]:
            arr = q if kind == "q" else m
            lo, hi = arr[idx - 1], arr[idx + 1]
            if hi - lo < 1e-14:
                continue

            def f(v, arr=arr, idx=idx):
                arr_try = arr.copy()
                arr_try[idx] = v
                trial = RSBParams(tuple(m if kind == "q" else arr_try), tuple(arr_try if kind == "q" else q))
                return obj.rsb_value(trial)

            res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-11, "maxiter": 60})
            cand = float(res.x)
            for edge in (lo, hi):
                fe = f(edge)
                if fe < res.fun:
                    res.fun, cand = fe, edge
            # moves along flat directions are not progress
            if res.fun < value - 1e-14:
                last_step = max(last_step, abs(cand - arr[idx]))
                arr[idx] = cand
                value = float(res.fun)
            if obj.n_evals - start > budget:
                break
        if last_step < step_tol or obj.n_evals - start > budget:
            break
    return RSBParams(tuple(m), tuple(q)), value, last_step < step_tol


def _residuals(spec, field, rsb, grid_cfg):
    fam = build_a_functions(spec, rsb, grid_cfg, field)
    return stationarity_residuals(fam, field), fam


def _relevant(res, rsb, mass_tol):
    masses = np.array([w for _, w in rsb.atoms()])
    return np.abs(res[masses > mass_tol]) if res.size else res


def optimize_level_k(spec, field, k: int, init: RSBParams | None = None, opts: OptimizerOptions | None = None) -> LevelResult:
    """Local minimum of P_k over ordered (m, q), best of several starts."""
    if k < 0:
        raise InvalidArgumentError("k must be >= 0")
    opts = opts or OptimizerOptions()
    spec.check()
    field = field or FieldSpec()
    fine = opts.grid_cfg.resolve(spec, field)
    obj_c = _Objective(spec, field, opts.coarse_grid.resolve(spec, field))
    obj_p = _Objective(spec, field, opts.polish_grid.resolve(spec, field))
    obj_f = _Objective(spec, field, fine)

    if k == 0:
        return _optimize_rs(obj_c, obj_f, spec, field, opts)

    rng = np.random.default_rng([opts.seed, k])
    starts = []
    if init is not None:
        if init.k != k:
            raise InvalidArgumentError(f"init has k={init.k}, expected {k}")
        starts.append(init)
    for _ in range(opts.n_restarts if init is None or opts.n_restarts else 0):
        dm = rng.dirichlet(np.ones(k + 1))
        dq = rng.dirichlet(np.ones(k + 2))
        starts.append(_from_increments(np.sqrt(dm), np.sqrt(dq)))
    if not starts:
        starts.append(_from_increments(np.ones(k + 1), np.ones(k + 2)))

    # exploration budget is capped separately from the polish budget
    per_start = max(60, min(250, opts.max_evals // (4 * len(starts))))
    candidates = []
    for s in starts:
        r, v, _ = _nelder_mead(obj_c, s, per_start, 1e-5, 1e-10)
        candidates.append((v, r))
    candidates.sort(key=lambda t: t[0])
    best_rsb = candidates[0][1]
    if init is not None:
        # never lose the warm start to coarse-grid noise
        if obj_p.rsb_value(init) < obj_p.rsb_value(best_rsb):
            best_rsb = init

    used = obj_c.n_evals + obj_p.n_evals
    budget = max(opts.max_evals - used, 0)
    rsb, value, _ = _nelder_mead(obj_p, best_rsb, min(budget // 2, 400), opts.step_tol, 1e-13)
    n_nm = obj_p.n_evals
    budget = max(opts.max_evals - obj_c.n_evals - obj_p.n_evals, 0)
    rsb, value, small_step = _coordinate_descent(obj_p, rsb, value, budget, opts.step_tol)
    value = obj_f.rsb_value(rsb)
    res, _ = _residuals(spec, field, rsb, fine)
    n_evals = obj_c.n_evals + obj_p.n_evals + obj_f.n_evals
    ok = small_step and bool(np.all(_relevant(res, rsb, opts.mass_tol) < opts.stationarity_tol))
    ok = ok and n_evals <= opts.max_evals
    log.debug("k=%d value=%.12f evals=%d/%d+%d/%d residuals=%s", k, value,
              obj_c.n_evals, n_nm, obj_p.n_evals - n_nm, obj_f.n_evals, res)
    return LevelResult(rsb, value, ok, n_evals, res)


def _optimize_rs(obj_c, obj_f, spec, field, opts):
    grid = np.linspace(0.0, 1.0, 41)
    vals = [obj_c.rsb_value(RSBParams.replica_symmetric(q)) for q in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

    def f(q):
        return obj_f.rsb_value(RSBParams.replica_symmetric(q))

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10, "maxiter": 200})
    q1, value = float(res.x), float(res.fun)
    for edge in (lo, hi):
        fe = f(edge)
        if fe <= value:
            q1, value = edge, fe
    rsb = RSBParams.replica_symmetric(q1)
    r, _ = _residuals(spec, field, rsb, obj_f.grid_cfg)
    # at q1 = 0 the first-order condition is one-sided
    ok = bool(res.success) and (abs(r[0]) < opts.stationarity_tol or q1 == 0.0)
    return LevelResult(rsb, value, ok, obj_c.n_evals + obj_f.n_evals, r)


def prune_atoms(spec, field, rsb: RSBParams, opts: OptimizerOptions, value=None):
    """Merge atoms closer than ``merge_tol`` and drop tiny masses.

    The pruned triplet is accepted only if the functional moves by less
    than ``prune_value_tol``.
    """
    atoms = rsb.atoms()
    merged = []
    for q, w in atoms:
        if merged and q - merged[-1][0] < opts.merge_tol:
            q0, w0 = merged[-1]
            merged[-1] = (q0 if w0 >= w else q, w0 + w)
        else:
            merged.append((q, w))
    kept = [(q, w) for q, w in merged if w >= opts.drop_mass] or [max(merged, key=lambda t: t[1])]
    if len(kept) == len(atoms):
        return rsb, value
    cand = RSBParams.from_atoms(kept)
    grid = opts.grid_cfg.resolve(spec, field)
    if value is None:
        value = parisi_functional(spec, field, rsb, grid)
    new_value = parisi_functional(spec, field, cand, grid)
    if abs(new_value - value) < opts.prune_value_tol:
        return cand, new_value
    return rsb, value


def _split_top(rsb: RSBParams) -> RSBParams:
    """Warm start for k+1: a zero-mass atom halfway above the top atom."""
    q_top = rsb.q[-2]
    return insert_atom(rsb, q_top + 0.5 * (1.0 - q_top))


def min_support(measure, mass_tol: float = 1e-4) -> float:
    """Smallest atom location carrying mass > ``mass_tol``."""
    rsb = measure.rsb if isinstance(measure, ParisiMeasure) else measure
    qs = [q for q, w in rsb.atoms() if w > mass_tol]
    if not qs:
        raise DegenerateMeasureError(f"no atom has mass > {mass_tol}")
    return float(min(qs))


def solve_parisi_measure(spec, field, tol: float = 1e-6, k_max: int = 3, opts: OptimizerOptions | None = None) -> ParisiMeasure:
    """Optimize k = 0, 1, ... until the improvement drops below ``tol``."""
    if tol <= 0:
        raise InvalidArgumentError("tol must be > 0")
    opts = opts or OptimizerOptions()
    field = field or FieldSpec()
    best = optimize_level_k(spec, field, 0, None, opts)
    converged = best.converged
    history = [(0, best.value)]
    for k in range(1, k_max + 1):
        init = best.rsb
        while init.k < k:
            init = _split_top(init)
        res = optimize_level_k(spec, field, k, init, opts)
        rsb, value = prune_atoms(spec, field, res.rsb, opts, res.value)
        value = min(value, history[-1][1])
        history.append((k, value))
        improvement = best.value - value
        if improvement < tol:
            break
        fam_res, _ = _residuals(spec, field, rsb, opts.grid_cfg.resolve(spec, field))
        best = LevelResult(rsb, value, res.converged, res.n_evals, fam_res)
        converged = res.converged
    grid = opts.grid_cfg.resolve(spec, field)
    fam = build_a_functions(spec, best.rsb, grid, field)
    residuals = stationarity_residuals(fam, field)
    seconds = second_moment_products(fam, field)
    measure = ParisiMeasure(
        rsb=best.rsb,
        value=float(best.value),
        c=0.0,
        residuals=residuals,
        second_moments=seconds,
        k_history=history,
        converged=bool(converged),
        global_certified=False,
        options={**opts.to_dict(), "tol": tol, "k_max": k_max,
                 "improvement_tol": tol, "stationarity_tol": opts.stationarity_tol},
    )
    measure.c = min_support(measure, opts.mass_tol)
    return measure
