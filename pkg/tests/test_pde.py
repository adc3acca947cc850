import numpy as np
import pytest

from parisichaos import (
    FieldSpec,
    GridConfig,
    InvalidArgumentError,
    MixtureSpec,
    RSBParams,
    build_a_functions,
    consistency_check,
    phi_derivative,
    solve_phi,
)
from parisichaos.pde import cauchy_gap

SPEC = MixtureSpec.sk(1.5)
RSB = RSBParams((0.0, 0.3, 0.7, 1.0), (0.0, 0.15, 0.4, 0.65, 1.0))


@pytest.fixture(scope="module")
def solution():
    return solve_phi(SPEC, RSB, GridConfig(), [0.2, 0.5])


def test_pde_matches_recursion_node_for_node(solution):
    gap = consistency_check(solution, build_a_functions(SPEC, RSB))
    assert gap["node_for_node"]
    assert gap["max_value_gap"] < 1e-8
    assert gap["max_deriv_gap"] < 1e-8


def test_terminal_condition(solution):
    x = np.linspace(-4, 4, 17)
    assert np.max(np.abs(solution.phi(x, 1.0) - np.log(np.cosh(x)))) < 1e-10
    assert np.max(np.abs(phi_derivative(solution, x, 1.0) - np.tanh(x))) < 1e-9


def test_unstored_level_is_propagated_not_interpolated(solution):
    # exp(0.3 Phi(., 0.3)) is the heat flow of exp(0.3 Phi(., 0.4)) on [0.3, 0.4)
    direct = solve_phi(SPEC, RSB, GridConfig(), [0.3])
    x = np.linspace(-3, 3, 25)
    assert np.max(np.abs(solution.phi(x, 0.3) - direct.phi(x, 0.3))) < 1e-12


def test_derivative_orders(solution):
    x = np.linspace(-2, 2, 9)
    h = 1e-4
    fd = (solution.phi(x + h, 0.5) - solution.phi(x - h, 0.5)) / (2 * h)
    assert np.max(np.abs(fd - phi_derivative(solution, x, 0.5, 1))) < 1e-7
    fd2 = (phi_derivative(solution, x + h, 0.5) - phi_derivative(solution, x - h, 0.5)) / (2 * h)
    assert np.max(np.abs(fd2 - phi_derivative(solution, x, 0.5, 2))) < 1e-6
    with pytest.raises(InvalidArgumentError):
        phi_derivative(solution, x, 0.5, 3)
    with pytest.raises(InvalidArgumentError):
        solution.at(1.5)


def test_refinement_is_cauchy():
    coarse = solve_phi(SPEC, RSB, GridConfig(n_nodes=1025, n_quad=41))
    fine = solve_phi(SPEC, RSB, GridConfig(n_nodes=4097, n_quad=81))
    gap = cauchy_gap(coarse, fine)
    assert gap["max_value_gap"] < 1e-7
    assert gap["max_deriv_gap"] < 1e-7


def test_mismatched_family_rejected(solution):
    with pytest.raises(InvalidArgumentError):
        consistency_check(solution, build_a_functions(SPEC, RSBParams.replica_symmetric(0.3)))
