"""scikit-learn style wrappers around the functional core.

Rows of ``X`` are experiment inputs: release settings for :class:`FrontClassifier`,
(t, x) points for :class:`ReleaseField`, parameter vectors for :class:`MinimalSpeed`.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model import ModelParams
from .release import ReleaseProfile, lambda_at
from .solver import Grid, SchemeConfig
from .waves import RunSetup, minimal_speed

PARAM_NAMES = tuple(f.name for f in fields(ModelParams))


def _model(params) -> ModelParams:
    if params is None:
        return ModelParams()
    if isinstance(params, ModelParams):
        return params
    return ModelParams.from_dict(dict(params))


class ReleaseField(TransformerMixin, BaseEstimator):
    """Release intensity ``A e^{-eta (x - c t)}`` on the treated side, zero elsewhere."""

    def __init__(self, A=600.0, eta=0.2, c=0.0):
        self.A = A
        self.eta = eta
        self.c = c

    def fit(self, X=None, y=None):
        self.profile_ = ReleaseProfile(float(self.A), float(self.eta), float(self.c))
        return self

    def transform(self, X):
        check_is_fitted(self, "profile_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected columns (t, x), got {X.shape[1]} columns")
        return lambda_at(self.profile_, X[:, 0], X[:, 1])


class MinimalSpeed(BaseEstimator):
    """Analytic minimal front speed for each row of model parameters.

    Columns follow ``PARAM_NAMES``; ``fit`` only validates the column count.
    """

    def __init__(self, tol=1e-10):
        self.tol = tol

    def fit(self, X=None, y=None):
        if X is not None:
            X = check_array(X, dtype=np.float64)
            self._check_width(X)
        self.n_features_in_ = len(PARAM_NAMES)
        return self

    def _check_width(self, X):
        if X.shape[1] != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} parameter columns {PARAM_NAMES}, got {X.shape[1]}")

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        self._check_width(X)
        return np.array([minimal_speed(ModelParams(*row), self.tol).c_bar for row in X])


class FrontClassifier(BaseEstimator):
    """Classifies release settings ``(A, eta, c)`` by simulating the controlled front.

    ``predict`` returns outcome labels, ``predict_speed`` the measured late-time
    front speeds (nan when there is no front to track).
    """

    def __init__(
        self,
        model_params=None,
        x_min=-300.0,
        x_max=400.0,
        dx=0.25,
        t_end=400.0,
        snapshot_every=5.0,
        dt_safety=0.9,
        init_x0=0.0,
        threshold_fraction=0.1,
        n_jobs=1,
    ):
        self.model_params = model_params
        self.x_min = x_min
        self.x_max = x_max
        self.dx = dx
        self.t_end = t_end
        self.snapshot_every = snapshot_every
        self.dt_safety = dt_safety
        self.init_x0 = init_x0
        self.threshold_fraction = threshold_fraction
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        grid = Grid.from_spacing(float(self.x_min), float(self.x_max), float(self.dx))
        cfg = SchemeConfig(dt_safety=float(self.dt_safety), t_end=float(self.t_end), snapshot_every=float(self.snapshot_every))
        if not grid.x_min < self.init_x0 < grid.x_max:
            raise ValueError("init_x0 must lie inside the domain")
        self.setup_ = RunSetup(_model(self.model_params), grid, cfg, float(self.init_x0), float(self.threshold_fraction))
        self.n_features_in_ = 3
        return self

    def _outcomes(self, X):
        check_is_fitted(self, "setup_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError(f"expected columns (A, eta, c), got {X.shape[1]} columns")
        releases = [ReleaseProfile(*row) for row in X]
        if self.n_jobs > 1 and len(releases) > 1:
            with ProcessPoolExecutor(max_workers=min(self.n_jobs, len(releases))) as ex:
                runs = list(ex.map(self.setup_.run, releases))
        else:
            runs = [self.setup_.run(pr) for pr in releases]
        return [out for _, _, out in runs]

    def predict(self, X):
        return np.array([o.kind for o in self._outcomes(X)], dtype=object)

    def predict_speed(self, X):
        return np.array([np.nan if o.measured_speed is None else o.measured_speed for o in self._outcomes(X)])

    def score(self, X, y):
        """Fraction of rows whose outcome label matches ``y``."""
        return float(np.mean(self.predict(X) == np.asarray(y, dtype=object)))
