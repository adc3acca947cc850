"""Fast numerical self-checks run by the ``verify`` subcommand."""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .chaos import (
    evaluate_phi_v,
    f_eta,
    guerra_report,
    guerra_zero_and_slope,
    standard_coupling,
    verify_subadditivity,
)
from .grid import GridConfig
from .mixture import MixtureSpec
from .optimize import OptimizerOptions, solve_parisi_measure
from .pde import consistency_check, solve_phi
from .rsb import FieldSpec, RSBParams, build_a_functions, insert_atom, parisi_functional
from .simulator import (
    SimConfig,
    _sample_exponents,
    energies,
    gray_code_energies,
    pair_shell_logsums,
    sample_couplings,
)


def _check(name, value, ok, tol):
    return {"name": name, "value": float(value), "tolerance": tol, "passed": bool(ok)}


def run_checks(spec: MixtureSpec, field: FieldSpec, seed: int = 0, n_restarts: int = 2) -> list:
    """Identity and inequality checks on one model; returns one record per check."""
    out = []
    sk = MixtureSpec.sk(0.8)
    rs = parisi_functional(sk, FieldSpec.constant(0.0), RSBParams.replica_symmetric(0.0))
    exact = np.log(2.0) + 0.8**2 / 4
    out.append(_check("replica symmetric closed form", rs - exact, abs(rs - exact) <= 1e-6, 1e-6))

    opts = OptimizerOptions(n_restarts=n_restarts, seed=seed)
    measure = solve_parisi_measure(spec, field, 1e-6, 1, opts)
    rsb = measure.rsb
    res = np.max(np.abs(measure.residuals)) if measure.residuals.size else 0.0
    out.append(_check("stationarity residual", res, res <= 1e-3, 1e-3))
    sec = float(np.max(measure.second_moments))
    out.append(_check("second moment identity", sec, sec <= 1.05, 1.05))

    p0 = measure.value
    p1 = parisi_functional(spec, field, insert_atom(rsb, 0.5 * (rsb.q[1] + rsb.q[-1])))
    out.append(_check("atom insertion invariance", p1 - p0, abs(p1 - p0) <= 1e-9, 1e-9))

    fam = build_a_functions(spec, rsb, GridConfig(), field)
    ev = max(abs(float(fam(p, 0.7) - fam(p, -0.7))) for p in range(rsb.k + 3))
    out.append(_check("evenness of A_p", ev, ev <= 1e-8, 1e-8))

    c = measure.c
    sol = solve_phi(spec, rsb, GridConfig(), [c], field)
    gap = consistency_check(sol, fam)
    g = max(gap["max_value_gap"], gap["max_deriv_gap"])
    out.append(_check("PDE and recursion agree", g, g <= 1e-6, 1e-6))

    if field.chaos_hypotheses_met and c > 0:
        v1 = evaluate_phi_v(sol, spec, field, c, c, 1.0)
        out.append(_check("phi_c(c, 1) = 0", v1, abs(v1) <= 1e-4, 1e-4))
        vh = evaluate_phi_v(sol, spec, field, c, c, 0.5)
        out.append(_check("phi_c(c, 0.5) < 0", vh, vh < -1e-4, -1e-4))
        v0 = evaluate_phi_v(sol, spec, field, c, 0.0, 0.5)
        out.append(_check("phi_c(0, 0.5) > 0", v0, v0 > 1e-4, 1e-4))
        u = 0.5 * c
        cp = standard_coupling(rsb, u, 0.5, mode="chaos", v=c)
        _, s0 = guerra_zero_and_slope(spec, field, cp)
        ph = evaluate_phi_v(sol, spec, field, c, u, 0.5)
        out.append(_check("slope equals phi_c", s0 - ph, abs(s0 - ph) <= 1e-5, 1e-5))

    cp = standard_coupling(rsb, 0.5 * rsb.q[-2], 0.0)
    a0 = guerra_report(spec, field, cp)["alpha"]
    out.append(_check("coupled bound at t = 0 equals 2P", a0 - 2 * p0, abs(a0 - 2 * p0) <= 1e-6, 1e-6))

    rng = np.random.default_rng([seed, 7])
    worst = np.inf
    for _ in range(50):
        x1, x2 = rng.uniform(-3, 3, 2)
        t = rng.uniform(0, 1)
        eta = 1 if rng.random() < 0.5 else -1
        w = rng.uniform(0, 0.125)
        worst = min(worst, f_eta(x1, x2, 0.2 + w, t, eta) - 0.5 * f_eta(x1, x2, 0.2, t, eta))
    out.append(_check("F(w'+w) >= F(w')/2", worst, worst >= -1e-12, 0.0))
    m = verify_subadditivity(fam, 0, 0.5, samples=50, seed=seed)
    out.append(_check("coupled log-E-exp subadditivity", m, m >= -1e-8, -1e-8))

    cfg = SimConfig(spec, field, N=6, t=0.5, n_disorder=1, seed=seed)
    a1, a2 = _sample_exponents(cfg, 0, True)
    sh = pair_shell_logsums(a1, a2, 6)
    full = logsumexp(a1) + logsumexp(a2)
    rel = abs(logsumexp(sh) - full)
    out.append(_check("overlap shells partition Z'", rel, rel <= 1e-10, 1e-10))
    cpl = sample_couplings(spec, 8, np.random.default_rng([seed, 9]))
    gd = abs(logsumexp(-gray_code_energies(spec, cpl, 8)) - logsumexp(-energies(spec, cpl, 8)))
    out.append(_check("Gray-code log Z", gd, gd <= 1e-12, 1e-12))
    return out
