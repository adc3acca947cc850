import json
import math

import numpy as np
import pytest

from oracles import rs_fixed_point
from parisichaos import (
    DegenerateMeasureError,
    FieldSpec,
    InvalidArgumentError,
    MixtureSpec,
    OptimizerOptions,
    ParisiMeasure,
    RSBParams,
    min_support,
    optimize_level_k,
    parisi_functional,
    solve_parisi_measure,
)
from parisichaos.optimize import prune_atoms

SK15 = MixtureSpec.sk(1.5)
FAST = OptimizerOptions(n_restarts=1)

# scalar fixed points of q = E tanh^2(h + z sqrt(xi'(q))) by adaptive quadrature
Q_FIXED_15_04 = 0.41032786508174585
Q_FIXED_08_03 = 0.14038022799689184


def test_high_temperature_rs_optimum():
    res = optimize_level_k(MixtureSpec.sk(0.8), FieldSpec.constant(0.0), 0)
    assert res.rsb.q[1] == pytest.approx(0.0, abs=1e-6)
    assert res.value == pytest.approx(math.log(2) + 0.16, abs=1e-5)
    assert res.converged


def test_rs_optimum_with_field_is_fixed_point():
    res = optimize_level_k(SK15, FieldSpec.constant(0.4), 0)
    assert res.rsb.q[1] == pytest.approx(Q_FIXED_15_04, abs=1e-4)
    assert rs_fixed_point([(2, 1.125)], 0.4) == pytest.approx(Q_FIXED_15_04, abs=1e-12)


def test_richer_ansatz_never_worse():
    f = FieldSpec.constant(0.4)
    r0 = optimize_level_k(SK15, f, 0)
    r1 = optimize_level_k(SK15, f, 1, opts=FAST)
    # a degenerate k=1 triplet reproduces RS only up to the insertion noise
    assert r1.value <= r0.value + 1e-9


def test_bad_level_and_init():
    with pytest.raises(InvalidArgumentError):
        optimize_level_k(SK15, FieldSpec(), -1)
    with pytest.raises(InvalidArgumentError):
        optimize_level_k(SK15, FieldSpec(), 2, init=RSBParams.replica_symmetric(0.3))


def test_evaluation_cap_flags_not_converged():
    res = optimize_level_k(SK15, FieldSpec.constant(0.0), 1, opts=OptimizerOptions(n_restarts=1, max_evals=40))
    assert not res.converged
    assert np.isfinite(res.value)


def test_rs_region_stops_at_k0():
    m = solve_parisi_measure(MixtureSpec.sk(0.8), FieldSpec.constant(0.3), 1e-6, 2, FAST)
    assert m.rsb.k == 0
    assert m.c == pytest.approx(m.rsb.q[1])
    assert m.c == pytest.approx(Q_FIXED_08_03, abs=1e-4)
    assert len(m.k_history) == 2
    assert m.k_history[0][1] - m.k_history[1][1] < 1e-6


def test_low_temperature_breaks_symmetry(sk_rsb):
    _, _, m = sk_rsb
    assert m.k_history[0][1] - m.k_history[1][1] > 1e-4
    assert m.rsb.k == 1
    vals = [v for _, v in m.k_history]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_forced_truncation():
    m = solve_parisi_measure(SK15, FieldSpec.constant(0.4), 1e-3, 0)
    assert len(m.k_history) == 1
    assert m.rsb.k == 0
    with pytest.raises(InvalidArgumentError):
        solve_parisi_measure(SK15, FieldSpec.constant(0.4), 0.0, 0)


def test_stationarity_at_optimum(sk_field, sk_rsb):
    for spec, field, m in (sk_field[:3], sk_rsb):
        masses = np.array([w for _, w in m.rsb.atoms()])
        assert np.all(np.abs(m.residuals[masses > 1e-4]) <= 1e-3)
        assert np.all(m.second_moments[masses > 1e-4] <= 1.05)


def test_min_support_rules(sk_field):
    m = sk_field[2]
    assert m.c > 0
    assert all(m.c <= q for q, w in m.atoms() if w > 1e-4)
    assert min_support(RSBParams.replica_symmetric(0.37)) == pytest.approx(0.37)
    with pytest.raises(DegenerateMeasureError):
        min_support(RSBParams.replica_symmetric(0.37), mass_tol=1.5)
    # zero-mass atom below the first massive one is skipped
    rsb = RSBParams((0.0, 0.0, 1.0), (0.0, 0.1, 0.5, 1.0))
    assert min_support(rsb) == pytest.approx(0.5)


def test_pruning_merges_close_atoms():
    f = FieldSpec.constant(0.4)
    rsb = RSBParams((0.0, 0.5, 1.0), (0.0, 0.41, 0.41 + 1e-6, 1.0))
    opts = OptimizerOptions()
    pruned, value = prune_atoms(SK15, f, rsb, opts)
    assert pruned.k == 0
    assert value == pytest.approx(parisi_functional(SK15, f, rsb), abs=1e-8)
    far = RSBParams((0.0, 0.5, 1.0), (0.0, 0.2, 0.6, 1.0))
    assert prune_atoms(SK15, f, far, opts)[0] == far


def test_reproducible_trajectory():
    f = FieldSpec.constant(0.0)
    a = optimize_level_k(SK15, f, 1, opts=FAST)
    b = optimize_level_k(SK15, f, 1, opts=FAST)
    assert a.rsb == b.rsb
    assert a.value == b.value
    assert a.n_evals == b.n_evals


def test_json_round_trip(sk_field):
    m = sk_field[2]
    d = json.loads(json.dumps(m.to_dict()))
    for key in ("value", "c", "atoms", "residuals", "k_history", "converged"):
        assert key in d
    back = ParisiMeasure.from_dict(d)
    assert back.rsb == m.rsb
    assert back.value == m.value
