import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parisichaos import GridConfig, GridFunction, MixtureSpec, FieldSpec
from parisichaos.quadrature import correlated_pairs, gauss_hermite, log_mean_exp


def test_gauss_hermite_moments():
    z, w = gauss_hermite(21)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert (w * z**2).sum() == pytest.approx(1.0, abs=1e-13)
    assert (w * z**4).sum() == pytest.approx(3.0, abs=1e-12)
    assert (w * np.cos(z)).sum() == pytest.approx(math.exp(-0.5), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_correlated_pairs_covariance(rho):
    y1, y2, w = correlated_pairs(15, rho)
    assert (w * y1 * y2).sum() == pytest.approx(rho, abs=1e-12)
    assert (w * y2 * y2).sum() == pytest.approx(1.0, abs=1e-12)


def test_log_mean_exp_is_stable():
    a = np.array([1000.0, 1000.0])
    assert log_mean_exp(a, np.array([0.5, 0.5])) == pytest.approx(1000.0)


def test_grid_function_linear_tails_and_accuracy():
    x = np.linspace(-4, 4, 201)
    f = GridFunction(-4, 4, np.sin(x), math.cos(-4.0), math.cos(4.0), derivs=np.cos(x))
    pts = np.linspace(-3.9, 3.9, 777)
    assert np.max(np.abs(f(pts) - np.sin(pts))) < 1e-7
    assert f(5.0) == pytest.approx(math.sin(4.0) + math.cos(4.0))
    assert f(-6.0) == pytest.approx(math.sin(-4.0) - 2 * math.cos(-4.0))


def test_resolved_half_width_covers_field():
    cfg = GridConfig().resolve(MixtureSpec.sk(1.5), FieldSpec.constant(0.4))
    assert cfg.half_width == pytest.approx(8 + 6 * 1.5 + 0.4)
    assert cfg.x_grid().size == 2049
