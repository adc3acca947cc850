"""Gaussian quadrature rules for expectations over standard normals."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss


@lru_cache(maxsize=32)
def gauss_hermite(n: int):
    """Nodes/weights with ``sum(w * f(z)) ~ E f(Z)``, Z ~ N(0, 1)."""
    z, w = hermegauss(int(n))
    w = w / np.sqrt(2.0 * np.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def correlated_pairs(n: int, rho: float):
    """Tensor rule for (Y1, Y2) standard normals with correlation ``rho``.

    Whitened as Y2 = rho Y1 + sqrt(1 - rho^2) Y_perp. Returns flat arrays
    ``(y1, y2, w)`` of length n^2.
    """
    z, w = gauss_hermite(n)
    rho = float(np.clip(rho, -1.0, 1.0))
    perp = np.sqrt(max(0.0, 1.0 - rho * rho))
    y1 = np.repeat(z, len(z))
    yp = np.tile(z, len(z))
    ww = np.outer(w, w).ravel()
    return y1, rho * y1 + perp * yp, ww


def log_mean_exp(a, weights, axis=-1):
    """log sum(weights * exp(a)) along ``axis`` with max-shift."""
    amax = np.max(a, axis=axis, keepdims=True)
    s = np.sum(np.exp(a - amax) * weights, axis=axis, keepdims=True)
    return np.squeeze(amax + np.log(s), axis=axis)


def field_rule(field, n: int):
    """Nodes and weights for the expectation over the external field."""
    return field.rule(n)
