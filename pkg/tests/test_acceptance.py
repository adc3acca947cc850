"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

The lines are printed as they run and gathered again in the terminal
summary (see conftest.py).
"""
import json
import math
import time

import numpy as np
import pytest

from oracles import rs_fixed_point
from parisichaos import (
    FieldSpec,
    GridConfig,
    MixtureSpec,
    OptimizerOptions,
    RSBParams,
    build_a_functions,
    chaos_bound,
    consistency_check,
    evaluate_phi_v,
    f_eta,
    guerra_bound,
    guerra_zero_and_slope,
    optimize_level_k,
    parisi_functional,
    solve_parisi_measure,
    solve_phi,
    solve_u_t,
    standard_coupling,
    verify_subadditivity,
)
from parisichaos.chaos import guerra_report
from parisichaos.cli import main
from parisichaos.io import read_csv, read_json
from parisichaos.simulator import FINITE_SIZE_NOTE, SimConfig, constrained_scan, lattice, overlap_distribution

LINES = []


def record(tag, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {tag} {title}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def sk_model():
    spec, field = MixtureSpec.sk(1.5), FieldSpec.constant(0.4)
    t0 = time.perf_counter()
    measure = solve_parisi_measure(spec, field)
    return spec, field, measure, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sk_broken():
    spec, field = MixtureSpec.sk(1.5), FieldSpec.constant(0.0)
    measure = solve_parisi_measure(spec, field, 1e-6, 1, OptimizerOptions(n_restarts=2))
    return spec, field, measure


def test_c01_rs_closed_form():
    t0 = time.perf_counter()
    m = solve_parisi_measure(MixtureSpec.sk(0.8), FieldSpec.constant(0.0))
    dt = time.perf_counter() - t0
    exact = math.log(2) + 0.8**2 / 4
    ok = abs(m.value - exact) <= 1e-5 and abs(m.c) <= 1e-4 and dt < 10
    record("C1", "RS closed form", ok,
           f"value={m.value:.9f} (exact {exact:.9f}), c={m.c:.2e}, {dt:.1f}s < 10s")


def test_c02_rs_fixed_point_with_field():
    spec, field = MixtureSpec.sk(1.5), FieldSpec.constant(0.4)
    t0 = time.perf_counter()
    res = optimize_level_k(spec, field, 0)
    dt = time.perf_counter() - t0
    q_oracle = rs_fixed_point([(2, 1.5**2 / 2)], 0.4)
    q1 = res.rsb.q[1]
    ok = abs(q1 - q_oracle) <= 1e-4 and dt < 30
    record("C2", "RS fixed point with field", ok,
           f"q1={q1:.8f}, fixed point={q_oracle:.8f}, gap={abs(q1 - q_oracle):.1e}, {dt:.1f}s < 30s")


def test_c03_stationarity(sk_model, sk_broken):
    worst_res, worst_sec = 0.0, 0.0
    for spec, field, m in (sk_model[:3], sk_broken):
        for (q, mass), r, s in zip(m.rsb.atoms(), m.residuals, m.second_moments):
            if mass > 1e-4:
                worst_res = max(worst_res, abs(float(r)))
                worst_sec = max(worst_sec, float(s))
    ok = worst_res <= 1e-3 and worst_sec <= 1.05
    record("C3", "stationarity identities", ok,
           f"max residual={worst_res:.1e} <= 1e-3, max xi''*second moment={worst_sec:.4f} <= 1.05")


def test_c04_pde_recursion(sk_model):
    spec, field, m, _ = sk_model
    sol = solve_phi(spec, m.rsb, GridConfig(), [m.c], field)
    gap = consistency_check(sol, build_a_functions(spec, m.rsb, GridConfig(), field))
    g = max(gap["max_value_gap"], gap["max_deriv_gap"])
    record("C4", "PDE and recursion agree", g <= 1e-6, f"max gap={g:.1e} <= 1e-6")


def test_c05_chaos_identities(sk_model):
    spec, field, m, t_solve = sk_model
    c = m.c
    t0 = time.perf_counter()
    sol = solve_phi(spec, m.rsb, GridConfig(), [c], field)
    p1 = evaluate_phi_v(sol, spec, field, c, c, 1.0)
    ph = evaluate_phi_v(sol, spec, field, c, c, 0.5)
    p0 = evaluate_phi_v(sol, spec, field, c, 0.0, 0.5)
    us = np.linspace(0.0, c, 20)
    changes = []
    for t in (0.2, 0.5, 0.8):
        vals = np.array([evaluate_phi_v(sol, spec, field, c, u, t) for u in us])
        changes.append(int(np.count_nonzero(np.diff(np.sign(vals)) != 0)))
    curve = [solve_u_t(sol, spec, field, c, t).u_t for t in np.arange(10) / 10]
    mono = all(b >= a for a, b in zip(curve, curve[1:]))
    dt = time.perf_counter() - t0 + t_solve
    ok = abs(p1) <= 1e-4 and ph < -1e-4 and p0 > 1e-4 and changes == [1, 1, 1] and mono and dt < 60
    record("C5", "chaos identities", ok,
           f"phi(c,1)={p1:.1e}, phi(c,.5)={ph:.3e}, phi(0,.5)={p0:.3e}, sign changes={changes}, "
           f"u_t nondecreasing={mono} ({curve[0]:.4f}..{curve[-1]:.4f}), {dt:.1f}s < 60s")


def test_c06_guerra_algebra(sk_model, sk_broken):
    notes, ok = [], True
    worst_excess, worst_t0 = -np.inf, 0.0
    for spec, field, m in (sk_model[:3], sk_broken):
        P = parisi_functional(spec, field, m.rsb)
        u = 0.5 * (m.rsb.q[-2] + m.rsb.q[1]) or 0.3
        for t in (0.0, 0.3, 0.7, 1.0):
            a = guerra_report(spec, field, standard_coupling(m.rsb, u, t))["alpha"]
            worst_excess = max(worst_excess, a - 2 * P)
            if t == 0.0:
                worst_t0 = max(worst_t0, abs(a - 2 * P))
    ok &= worst_excess <= 1e-8 and worst_t0 <= 1e-6
    notes.append(f"max alpha(0)-2P={worst_excess:.1e}, |t=0 gap|={worst_t0:.1e}")

    spec, field, m, _ = sk_model
    sol = solve_phi(spec, m.rsb, GridConfig(), [m.c], field)
    slope_gap = 0.0
    for u in (0.05, 0.15, 0.3):
        cp = standard_coupling(m.rsb, u, 0.5, mode="chaos", v=m.c)
        _, s0 = guerra_zero_and_slope(spec, field, cp)
        slope_gap = max(slope_gap, abs(s0 - evaluate_phi_v(sol, spec, field, m.c, u, 0.5)))
    ok &= slope_gap <= 1e-5
    notes.append(f"slope vs phi gap={slope_gap:.1e}")

    cp = standard_coupling(m.rsb, 0.2, 0.5, mode="chaos", v=m.c)
    d, seconds = 1e-2, []
    for lam in np.linspace(-1, 1, 5):
        v = [guerra_bound(spec, field, cp.with_lambda(lam + s), self_test=False) for s in (-d, 0.0, d)]
        seconds.append((v[0] - 2 * v[1] + v[2]) / d**2)
    ok &= -1e-6 <= min(seconds) and max(seconds) <= 1 + 1e-6
    notes.append(f"second difference in [{min(seconds):.4f}, {max(seconds):.4f}]")
    record("C6", "Guerra bound algebra", ok, "; ".join(notes))


def test_c07_bound_dominates_simulation(sk_model):
    spec, field, m, _ = sk_model
    t, N = 0.5, 10
    t0 = time.perf_counter()
    us = [float(u) for u in lattice(N) if 0.0 <= u <= m.c + 1e-12]
    scan = constrained_scan(SimConfig(spec, field, N=N, t=t, n_disorder=300, seed=0, threads=8), us)
    rows, ok = [], True
    for u, r in zip(us, scan):
        b = chaos_bound(spec, field, standard_coupling(m.rsb, u, t, mode="chaos", v=m.c))
        ok &= r.estimate <= b + 3 * r.stderr
        rows.append(f"u={u:.1f}: p={r.estimate:.4f}+-{r.stderr:.4f} vs bound {b:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    record("C7", "bound dominates p_uN", ok, "; ".join(rows) + f"; {dt:.1f}s < 600s")


def _random_triplet(rng):
    k = int(rng.integers(0, 4))
    m = np.sort(rng.uniform(0, 1, k))
    q = np.sort(rng.uniform(0, 1, k + 1))
    if rng.random() < 0.5:
        spec = MixtureSpec.sk(float(rng.uniform(0.3, 2.0)))
    else:
        spec = MixtureSpec.from_pairs([(2, float(rng.uniform(0.05, 1.5))), (4, float(rng.uniform(0.05, 1.0)))])
    return spec, RSBParams((0.0, *m, 1.0), (0.0, *q, 1.0))


def test_c08_derivative_bounds():
    rng = np.random.default_rng(2024)
    worst = {"A1": 0.0, "A2min": np.inf, "A2excess": -np.inf, "A3": 0.0, "A4": 0.0}
    for _ in range(20):
        spec, rsb = _random_triplet(rng)
        fam = build_a_functions(spec, rsb)
        xs = rng.uniform(-6, 6, 50)
        C = 4.0 * math.exp(2.0 * spec.xi(1.0, 1))
        x, dx = fam.x, fam.x[1] - fam.x[0]
        for p in range(rsb.k + 3):
            a1, a2 = fam(p, xs, 1), fam(p, xs, 2)
            d2 = fam.node_values(p)[2]
            d3 = np.gradient(d2, dx)
            d4 = np.gradient(d3, dx)
            worst["A1"] = max(worst["A1"], float(np.max(np.abs(a1))))
            worst["A2min"] = min(worst["A2min"], float(np.min(a2)))
            cap = np.minimum(1.0, C / np.cosh(xs) ** 2)
            worst["A2excess"] = max(worst["A2excess"], float(np.max(a2 - cap)))
            worst["A3"] = max(worst["A3"], float(np.max(np.abs(np.interp(xs, x, d3)))))
            worst["A4"] = max(worst["A4"], float(np.max(np.abs(np.interp(xs, x, d4)))))
    ok = (worst["A1"] <= 1 + 1e-6 and worst["A2min"] > 0 and worst["A2excess"] <= 0
          and worst["A3"] <= 4.001 and worst["A4"] <= 8.01)
    record("C8", "derivative bounds on 20 random triplets", ok,
           f"max|A'|={worst['A1']:.6f}, min A''={worst['A2min']:.2e}, max(A''-cap)={worst['A2excess']:.2e}, "
           f"max|A'''|={worst['A3']:.4f}, max|A''''|={worst['A4']:.4f}")


def test_c09_inequalities():
    rng = np.random.default_rng(9)
    margin = np.inf
    spec = MixtureSpec.sk(1.5)
    fam = build_a_functions(spec, RSBParams((0.0, 0.3, 0.7, 1.0), (0.0, 0.2, 0.45, 0.7, 1.0)))
    for i, (p, t) in enumerate([(0, 0.2), (1, 0.5), (2, 0.8), (1, 0.95), (3, 0.4)]):
        margin = min(margin, verify_subadditivity(fam, p, t, samples=100, seed=i))
    worst = np.inf
    for _ in range(200):
        x1, x2 = rng.uniform(-4, 4, 2)
        t, wp, w = rng.uniform(0, 1), rng.uniform(0, 2), rng.uniform(0, 0.125)
        worst = min(worst, f_eta(x1, x2, wp + w, t) - 0.5 * f_eta(x1, x2, wp, t))
    ok = margin >= -1e-8 and worst >= 0.0
    record("C9", "coupled inequalities", ok,
           f"subadditivity min margin={margin:.2e} over 500 samples; F growth min margin={worst:.2e} over 200")


def test_c10_chaos_at_desk_scale(sk_model):
    spec, field, m, _ = sk_model
    t0 = time.perf_counter()
    sol = solve_phi(spec, m.rsb, GridConfig(), [m.c], field)
    u = {t: solve_u_t(sol, spec, field, m.c, t).u_t for t in (0.2, 0.9)}
    mean = {}
    for t in (0.2, 0.9):
        d = overlap_distribution(SimConfig(spec, field, N=12, t=t, n_disorder=300, seed=0, threads=8))
        mean[t] = (d.estimate, d.stderr)
    gap_02 = abs(mean[0.2][0] - u[0.2])
    gap_09 = abs(mean[0.9][0] - u[0.2])
    own_09 = abs(mean[0.9][0] - u[0.9])
    dt = time.perf_counter() - t0
    ok = gap_02 < gap_09 and dt < 900
    record("C10", "qualitative chaos N=12", ok,
           f"u_0.2={u[0.2]:.4f}, u_0.9={u[0.9]:.4f}; mean(t=0.2)={mean[0.2][0]:.4f}+-{mean[0.2][1]:.4f}, "
           f"mean(t=0.9)={mean[0.9][0]:.4f}+-{mean[0.9][1]:.4f}; |mean0.2-u0.2|={gap_02:.4f} < "
           f"|mean0.9-u0.2|={gap_09:.4f} (info: |mean0.9-u0.9|={own_09:.4f}); {dt:.1f}s < 900s; "
           f"{FINITE_SIZE_NOTE}")


def test_c11_thread_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "optimizer": {"k_max": 0},
        "chaos": {"t_grid": [0.0, 0.5]},
        "simulate": {"N": 8, "t": 0.5, "n_disorder": 40, "u_grid": [0.0, 0.25],
                     "outputs": ["free_energy", "constrained", "overlap"]},
    }))
    same = []
    for cmd, fname in (("simulate", "simulate.json"), ("solve", "measure.json"), ("chaos-curve", "chaos_curve.csv")):
        got = []
        for threads in ("1", "8"):
            out = tmp_path / f"{cmd}-{threads}"
            code = main([cmd, "--config", str(cfg), "--preset", "sk:beta=1.5,h=0.4", "--seed", "17",
                         "--threads", threads, "--out", str(out)])
            assert code == 0
            path = out / fname
            got.append(read_json(path)["result"] if fname.endswith(".json") else read_csv(path)[2])
        same.append(got[0] == got[1])
    record("C11", "determinism across thread counts", all(same),
           f"identical estimates for simulate/solve/chaos-curve with --threads 1 and 8: {same}")
