"""Command-line front end: solve, chaos-curve, bound-scan, simulate, verify."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .chaos import guerra_zero_and_slope, solve_u_t, standard_coupling
from .errors import ConfigError, NoBracketError, ParisiChaosError
from .grid import GridConfig
from .io import read_json, write_csv, write_json
from .mixture import MixtureSpec, parse_preset, validate_mixture
from .optimize import OptimizerOptions, ParisiMeasure, solve_parisi_measure
from .pde import solve_phi
from .rsb import FieldSpec
from .simulator import (
    FINITE_SIZE_NOTE,
    SimConfig,
    constrained_scan,
    exact_free_energy,
    overlap_distribution,
)
from .validation import config_field

log = logging.getLogger("parisichaos")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_CAPACITY, EXIT_NUMERICAL = 0, 1, 2, 3, 4

_TOP_KEYS = {"model", "preset", "optimizer", "grid", "chaos", "simulate", "seed", "threads"}
_SIM_OUTPUTS = {"free_energy", "constrained", "overlap"}


# -- configuration -----------------------------------------------------------


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw


def _model_block(raw, preset):
    """(spec, field) from --preset, a top-level preset, or the model block."""
    model = raw.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError("model: must be an object")
    preset = preset or raw.get("preset") or model.get("preset")
    h = None
    if preset:
        spec, h = parse_preset(preset)
    elif "mixture" in model:
        pairs = config_field(model, "mixture", list, "model")
        try:
            spec = MixtureSpec.from_pairs(pairs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model.mixture: {exc}") from None
    else:
        raise ConfigError("model.mixture: missing mixture block (or use --preset)")
    report = validate_mixture(spec)
    if not report.valid:
        raise ConfigError("model.mixture: " + "; ".join(report.violations))
    fblock = model.get("field", {})
    if not isinstance(fblock, dict):
        raise ConfigError("model.field: must be an object")
    try:
        field = FieldSpec.from_dict(fblock) if fblock else FieldSpec.constant(0.0)
    except ParisiChaosError as exc:
        raise ConfigError(f"model.field: {exc}") from None
    if h is not None:
        field = FieldSpec.constant(h)
    return spec, field


def resolve_config(raw: dict, args) -> dict:
    """All settings with defaults materialized; this dict is embedded in outputs."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level field(s): {sorted(unknown)}")
    spec, field = _model_block(raw, getattr(args, "preset", None))
    seed = args.seed if args.seed is not None else config_field(raw, "seed", int, "config", 0)
    threads = args.threads if args.threads is not None else config_field(raw, "threads", int, "config", 1)
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")
    if threads < 1:
        raise ConfigError("threads: must be >= 1")

    ob = raw.get("optimizer", {})
    opt = {
        "tol": config_field(ob, "tol", float, "optimizer", 1e-6),
        "k_max": config_field(ob, "k_max", int, "optimizer", 3),
        "n_restarts": config_field(ob, "n_restarts", int, "optimizer", 8),
        "max_evals": config_field(ob, "max_evals", int, "optimizer", 5000),
        "stationarity_tol": config_field(ob, "stationarity_tol", float, "optimizer", 1e-3),
        "mass_tol": config_field(ob, "mass_tol", float, "optimizer", 1e-4),
        "seed": seed,
    }
    if opt["tol"] <= 0 or opt["k_max"] < 0 or opt["n_restarts"] < 0 or opt["max_evals"] < 1:
        raise ConfigError("optimizer: tol > 0, k_max >= 0, n_restarts >= 0, max_evals >= 1 required")

    gb = raw.get("grid", {})
    try:
        grid = GridConfig(
            half_width=config_field(gb, "half_width", float, "grid", None),
            n_nodes=config_field(gb, "n_nodes", int, "grid", GridConfig.n_nodes),
            n_quad=config_field(gb, "n_quad", int, "grid", GridConfig.n_quad),
            n_quad_h=config_field(gb, "n_quad_h", int, "grid", GridConfig.n_quad_h),
            n_nodes_2d=config_field(gb, "n_nodes_2d", int, "grid", GridConfig.n_nodes_2d),
            half_width_2d=config_field(gb, "half_width_2d", float, "grid", None),
        ).resolve(spec, field)
    except ParisiChaosError as exc:
        raise ConfigError(f"grid: {exc}") from None

    cb = raw.get("chaos", {})
    chaos = {
        "t_grid": [float(t) for t in config_field(cb, "t_grid", list, "chaos", [0.0, 0.25, 0.5, 0.75])],
        "u_grid": config_field(cb, "u_grid", list, "chaos", None),
        "n_u": config_field(cb, "n_u", int, "chaos", 11),
        "t": config_field(cb, "t", float, "chaos", 0.5),
        "tol": config_field(cb, "tol", float, "chaos", 1e-8),
        "measure_file": config_field(cb, "measure_file", str, "chaos", None),
    }
    if any(not 0.0 <= t <= 1.0 for t in chaos["t_grid"]) or not 0.0 <= chaos["t"] <= 1.0:
        raise ConfigError("chaos: t values must lie in [0, 1]")

    sb = raw.get("simulate", {})
    sim = {
        "N": config_field(sb, "N", int, "simulate", 8),
        "t": config_field(sb, "t", float, "simulate", 0.5),
        "n_disorder": config_field(sb, "n_disorder", int, "simulate", 100),
        "u_grid": [float(u) for u in config_field(sb, "u_grid", list, "simulate", [])],
        "outputs": config_field(sb, "outputs", list, "simulate", ["free_energy", "overlap"]),
        "compare_u_t": bool(sb.get("compare_u_t", False)),
    }
    bad = set(sim["outputs"]) - _SIM_OUTPUTS
    if bad:
        raise ConfigError(f"simulate.outputs: unknown entries {sorted(bad)}")
    if sim["u_grid"] and "constrained" not in sim["outputs"]:
        sim["outputs"] = list(sim["outputs"]) + ["constrained"]

    return {
        "model": {"mixture": spec.to_pairs(), "field": field.to_dict()},
        "optimizer": opt,
        "grid": grid.to_dict(),
        "chaos": chaos,
        "simulate": sim,
        "seed": seed,
        "threads": threads,
    }


def _objects(cfg):
    spec = MixtureSpec.from_pairs(cfg["model"]["mixture"])
    field = FieldSpec.from_dict(cfg["model"]["field"])
    grid = GridConfig(**cfg["grid"])
    o = cfg["optimizer"]
    opts = OptimizerOptions(
        max_evals=o["max_evals"], stationarity_tol=o["stationarity_tol"], n_restarts=o["n_restarts"],
        seed=o["seed"], mass_tol=o["mass_tol"], grid_cfg=grid,
    )
    return spec, field, grid, opts


def _measure(cfg, spec, field, opts):
    path = cfg["chaos"]["measure_file"]
    if path:
        try:
            return ParisiMeasure.from_dict(read_json(path)["result"])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"chaos.measure_file: cannot load {path}: {exc}") from None
    o = cfg["optimizer"]
    return solve_parisi_measure(spec, field, o["tol"], o["k_max"], opts)


# -- commands ----------------------------------------------------------------


def cmd_solve(cfg, out_dir):
    spec, field, grid, opts = _objects(cfg)
    o = cfg["optimizer"]
    measure = solve_parisi_measure(spec, field, o["tol"], o["k_max"], opts)
    write_json(os.path.join(out_dir, "measure.json"), "parisi_measure", cfg, measure.to_dict())
    return EXIT_OK if measure.converged else EXIT_NOT_CONVERGED


def cmd_chaos_curve(cfg, out_dir):
    spec, field, grid, opts = _objects(cfg)
    measure = _measure(cfg, spec, field, opts)
    c = measure.c
    sol = solve_phi(spec, measure.rsb, grid, [c], field)
    rows = []
    for t in cfg["chaos"]["t_grid"]:
        try:
            pt = solve_u_t(sol, spec, field, c, t, cfg["chaos"]["tol"], grid.n_quad)
            rows.append([t, pt.u_t, pt.phi_at_c, pt.bisection_iters])
        except NoBracketError as exc:
            rows.append([t, "no-bracket", exc.f_hi, 0])
    cfg = {**cfg, "resolved": {"c": c, "measure_value": measure.value}}
    write_csv(os.path.join(out_dir, "chaos_curve.csv"), "chaos_curve", cfg,
              ["t", "u_t", "phi_c_at_c", "iters"], rows)
    return EXIT_OK if measure.converged else EXIT_NOT_CONVERGED


def cmd_bound_scan(cfg, out_dir):
    spec, field, grid, opts = _objects(cfg)
    measure = _measure(cfg, spec, field, opts)
    c = measure.c
    t = cfg["chaos"]["t"]
    us = cfg["chaos"]["u_grid"]
    us = list(np.linspace(0.0, c, cfg["chaos"]["n_u"])) if us is None else [float(u) for u in us]
    rows = []
    for u in us:
        if not 0.0 <= u <= c:
            rows.append([u, t, "", "", "", "outside [0, c]"])
            continue
        cp = standard_coupling(measure.rsb, u, t, mode="chaos", v=c)
        a0, s0 = guerra_zero_and_slope(spec, field, cp, grid)
        rows.append([u, t, a0, s0, a0 - 0.5 * s0 * s0, ""])
    cfg = {**cfg, "resolved": {"c": c, "u_grid": us, "measure_value": measure.value}}
    write_csv(os.path.join(out_dir, "bound_scan.csv"), "bound_scan", cfg,
              ["u", "t", "alpha0", "slope0", "quad_bound", "flag"], rows)
    return EXIT_OK if measure.converged else EXIT_NOT_CONVERGED


def cmd_simulate(cfg, out_dir):
    spec, field, grid, opts = _objects(cfg)
    s = cfg["simulate"]
    sc = SimConfig(spec, field, s["N"], s["t"], s["n_disorder"], cfg["seed"], cfg["threads"])
    result = {"note": FINITE_SIZE_NOTE}
    if "free_energy" in s["outputs"]:
        result["free_energy"] = exact_free_energy(sc).to_dict()
    if "constrained" in s["outputs"] and s["u_grid"]:
        scan = constrained_scan(sc, s["u_grid"])
        result["constrained"] = [r.to_dict() for r in scan]
    dist = None
    if "overlap" in s["outputs"] or s["compare_u_t"]:
        dist = overlap_distribution(sc)
        result["overlap"] = dist.to_dict()
        write_csv(os.path.join(out_dir, "overlap.csv"), "overlap_distribution", cfg,
                  ["r", "mass", "stderr"], [[row["r"], row["mass"], row["stderr"]] for row in dist.table])
    status = EXIT_OK
    if s["compare_u_t"]:
        measure = _measure(cfg, spec, field, opts)
        sol = solve_phi(spec, measure.rsb, grid, [measure.c], field)
        try:
            u_t = solve_u_t(sol, spec, field, measure.c, s["t"], cfg["chaos"]["tol"]).u_t
        except NoBracketError:
            u_t = measure.c
        comp = {"t": s["t"], "u_t": u_t, "overlap_mean": dist.estimate, "overlap_stderr": dist.stderr,
                "abs_gap": abs(dist.estimate - u_t), "c": measure.c}
        result["comparison"] = comp
        write_csv(os.path.join(out_dir, "overlap_vs_u_t.csv"), "overlap_vs_u_t", cfg,
                  list(comp), [list(comp.values())])
        if not measure.converged:
            status = EXIT_NOT_CONVERGED
    write_json(os.path.join(out_dir, "simulate.json"), "simulation", cfg, result)
    return status


def cmd_verify(cfg, out_dir):
    from .verify import run_checks

    spec, field, grid, opts = _objects(cfg)
    checks = run_checks(spec, field, cfg["seed"], n_restarts=min(cfg["optimizer"]["n_restarts"], 2))
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}  value={c['value']:.3e}")
    write_json(os.path.join(out_dir, "verify.json"), "verify", cfg, {"checks": checks})
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_NUMERICAL


COMMANDS = {
    "solve": cmd_solve,
    "chaos-curve": cmd_chaos_curve,
    "bound-scan": cmd_bound_scan,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="parisichaos", description="Parisi measure, disorder chaos bounds and small-N checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--preset", metavar="sk:beta=F[,h=F]", help="model preset")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(load_config(args.config), args)
        code = COMMANDS[args.command](cfg, args.out)
    except ParisiChaosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if code == EXIT_NOT_CONVERGED:
        print("warning: optimizer did not converge", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
