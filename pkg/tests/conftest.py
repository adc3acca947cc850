import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from parisichaos import FieldSpec, GridConfig, MixtureSpec, OptimizerOptions, solve_parisi_measure, solve_phi  # noqa: E402


@pytest.fixture(scope="session")
def sk_field():
    """SK beta=1.5 with constant field 0.4: replica symmetric optimum."""
    spec, field = MixtureSpec.sk(1.5), FieldSpec.constant(0.4)
    measure = solve_parisi_measure(spec, field, 1e-6, 3)
    sol = solve_phi(spec, measure.rsb, GridConfig(), [measure.c], field)
    return spec, field, measure, sol


@pytest.fixture(scope="session")
def sk_rsb():
    """SK beta=1.5, h=0: one step of symmetry breaking lowers the value."""
    spec, field = MixtureSpec.sk(1.5), FieldSpec.constant(0.0)
    measure = solve_parisi_measure(spec, field, 1e-6, 1, OptimizerOptions(n_restarts=2))
    return spec, field, measure


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
