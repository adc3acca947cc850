"""scikit-learn style wrappers around the functional core.

The model has no training data: ``fit`` solves the variational problem for
the configured mixture and field, and ``predict`` evaluates the fitted
object on new inputs (q values for the measure, t values for the chaos
curve).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .chaos import evaluate_phi_v, solve_u_t
from .errors import NoBracketError
from .grid import GridConfig
from .mixture import MixtureSpec
from .optimize import OptimizerOptions, solve_parisi_measure
from .pde import solve_phi
from .rsb import FieldSpec
from .validation import check_grid, check_int, check_positive


def _model(beta, mixture, h, field_sd):
    spec = MixtureSpec.from_pairs(mixture) if mixture is not None else MixtureSpec.sk(beta)
    spec.check()
    field = FieldSpec.gaussian(h, field_sd) if field_sd else FieldSpec.constant(h)
    return spec, field


class ParisiEstimator(BaseEstimator):
    """Optimized discrete Parisi measure for one model.

    ``predict(q)`` returns the distribution function mu([0, q]).
    """

    def __init__(self, beta=1.0, mixture=None, h=0.0, field_sd=0.0, tol=1e-6, k_max=3,
                 n_restarts=8, seed=0):
        self.beta = beta
        self.mixture = mixture
        self.h = h
        self.field_sd = field_sd
        self.tol = tol
        self.k_max = k_max
        self.n_restarts = n_restarts
        self.seed = seed

    def fit(self, X=None, y=None):
        check_positive(self.tol, "tol")
        check_int(self.k_max, "k_max", 0)
        self.spec_, self.field_ = _model(self.beta, self.mixture, self.h, self.field_sd)
        opts = OptimizerOptions(n_restarts=check_int(self.n_restarts, "n_restarts", 0),
                                seed=check_int(self.seed, "seed", 0))
        self.measure_ = solve_parisi_measure(self.spec_, self.field_, self.tol, self.k_max, opts)
        self.value_ = self.measure_.value
        self.c_ = self.measure_.c
        return self

    def _check_fitted(self):
        if not hasattr(self, "measure_"):
            raise NotFittedError("call fit first")

    def predict(self, X):
        self._check_fitted()
        q = check_grid(X, "q", 0.0, 1.0)
        atoms = self.measure_.atoms()
        return np.array([sum(w for a, w in atoms if a <= qv) for qv in q])

    def score(self, X=None, y=None):
        """Negative functional value (larger is better)."""
        self._check_fitted()
        return -self.value_


class ChaosCurveEstimator(BaseEstimator, TransformerMixin):
    """Maps t to the chaos overlap u_t of the fitted measure.

    At t = 1 there is no sign change; the continuous limit u_1 = c is
    returned there.
    """

    def __init__(self, beta=1.0, mixture=None, h=0.0, field_sd=0.0, tol=1e-8, k_max=3,
                 n_restarts=8, seed=0, measure=None):
        self.beta = beta
        self.mixture = mixture
        self.h = h
        self.field_sd = field_sd
        self.tol = tol
        self.k_max = k_max
        self.n_restarts = n_restarts
        self.seed = seed
        self.measure = measure

    def fit(self, X=None, y=None):
        check_positive(self.tol, "tol")
        self.spec_, self.field_ = _model(self.beta, self.mixture, self.h, self.field_sd)
        if self.measure is None:
            opts = OptimizerOptions(n_restarts=self.n_restarts, seed=self.seed)
            self.measure_ = solve_parisi_measure(self.spec_, self.field_, 1e-6, self.k_max, opts)
        else:
            self.measure_ = self.measure
        self.c_ = self.measure_.c
        self.solution_ = solve_phi(self.spec_, self.measure_.rsb, GridConfig(), [self.c_], self.field_)
        return self

    def _point(self, t):
        try:
            return solve_u_t(self.solution_, self.spec_, self.field_, self.c_, t, self.tol)
        except NoBracketError:
            if t == 1.0:
                return None
            raise

    def predict(self, X):
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit first")
        ts = check_grid(X, "t", 0.0, 1.0)
        out = []
        for t in ts:
            p = self._point(float(t))
            out.append(self.c_ if p is None else p.u_t)
        return np.array(out)

    def transform(self, X):
        """Columns (u_t, phi_c(c, t))."""
        ts = check_grid(X, "t", 0.0, 1.0)
        u = self.predict(ts)
        ph = [evaluate_phi_v(self.solution_, self.spec_, self.field_, self.c_, self.c_, t) for t in ts]
        return np.column_stack([u, ph])
