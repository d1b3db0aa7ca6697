"""Scikit-learn style front end for the interface solvers.

``InterfaceSolver`` wraps the configure/train/evaluate cycle behind the
familiar estimator surface: constructor parameters mirror ``get_params``,
``fit`` trains on the configured benchmark problem (collocation data is
generated internally from the seed, so X/y are accepted and ignored), and
``predict`` evaluates the trained piecewise solution at query points.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .geometry import as_points
from .metrics import compute_errors
from .presets import preset
from .problems import builtin
from .training import train


class InterfaceSolver(BaseEstimator):
    """Train one solver method on one benchmark problem.

    Parameters
    ----------
    problem : str
        Benchmark id ('ex1' .. 'ex5', 'ex2:k=3', ...).
    method : str
        'ae', 'pinn', 'mpinn', or 'ipinn'.
    preset : str
        'paper' (published iteration budgets) or 'desk' (reduced).
    iterations : int or None
        Override the preset's iteration count.
    seed : int
        Global seed for initialization and sampling.
    """

    def __init__(self, problem="ex1", method="ae", preset="paper", iterations=None, seed=1234):
        self.problem = problem
        self.method = method
        self.preset = preset
        self.iterations = iterations
        self.seed = seed

    def _config(self):
        return preset(
            self.problem,
            self.method,
            mode=self.preset,
            seed=self.seed,
            iterations=self.iterations,
        )

    def fit(self, X=None, y=None):
        """Train on the configured problem; X and y are ignored."""
        self.spec_ = builtin(self.problem)
        self.config_ = self._config()
        self.model_, self.history_, self.points_ = train(self.config_, self.spec_)
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit() before predict/score")

    def predict(self, X):
        """Piecewise solution values at an (n, d) array of query points."""
        self._require_fitted()
        X = as_points(X, self.spec_.dim)
        return self.model_.predict(X)

    def predict_exact(self, X):
        """Exact-solution values at query points (for error inspection)."""
        self._require_fitted()
        return self.spec_.u_exact(as_points(X, self.spec_.dim))

    def error_report(self, grid=None):
        """Error metrics over the problem's test grid (or a custom grid)."""
        self._require_fitted()
        return compute_errors(self.model_, self.spec_, grid)

    def score(self, X=None, y=None):
        """Negated relative L2 error on the test grid (higher is better)."""
        report = self.error_report()
        if report.e_l2rel is None:
            raise ValueError("relative error undefined: exact solution has zero norm")
        return -report.e_l2rel
