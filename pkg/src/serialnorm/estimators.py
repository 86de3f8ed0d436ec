"""Estimator-style wrappers so the tests compose with scikit-learn tooling."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import stats, var
from ._validation import as_series, centered


class KurtosisNormalityTest(BaseEstimator):
    """Normality test based on multivariate kurtosis, as a fit-once estimator.

    ``fit(X)`` centers the data (optional), evaluates the kurtosis statistic
    and the selected null moments, and stores the verdict:

    Attributes
    ----------
    statistic_ : float
    moments_ : stats.NullMoments
    z_ : float
    p_value_ : float
    reject_ : bool

    ``moments`` is ``"colored"``, ``"iid"``, or a ``stats.NullMoments``
    instance for user-supplied moments.
    """

    def __init__(
        self,
        alpha: float = 0.05,
        moments="colored",
        max_lag: int | None = None,
        calibration: stats.CalibrationConfig | None = None,
        center: bool = True,
    ):
        self.alpha = alpha
        self.moments = moments
        self.max_lag = max_lag
        self.calibration = calibration
        self.center = center

    def fit(self, X, y=None):
        x = as_series(X)
        statistic, mom, verdict = stats.test_series(
            x,
            alpha=self.alpha,
            moments=self.moments,
            max_lag=self.max_lag,
            calibration=self.calibration,
            center=self.center,
        )
        self.n_samples_, self.n_features_in_ = x.shape
        self.statistic_ = statistic
        self.moments_ = mom
        self.z_ = verdict.z
        self.p_value_ = verdict.p_value
        self.reject_ = verdict.reject
        self.verdict_ = verdict
        return self


class VarWhitener(BaseEstimator, TransformerMixin):
    """Least squares autoregressive prewhitener.

    ``fit(X)`` estimates VAR(order) coefficients; ``transform(X)`` returns the
    one-step prediction residuals (``order`` rows shorter than the input).
    """

    def __init__(self, order: int = 1):
        self.order = order

    def fit(self, X, y=None):
        x = as_series(X)
        self.model_ = var.fit_ols(x, self.order)
        self.n_features_in_ = x.shape[1]
        residuals = self.model_.residuals(x)
        centered_res = centered(residuals)
        self.noise_cov_ = centered_res.T @ centered_res / residuals.shape[0]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.residuals(as_series(X, dim=self.n_features_in_))
