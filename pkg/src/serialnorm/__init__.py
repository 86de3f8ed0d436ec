"""Kurtosis-based normality testing for serially dependent data.

The package tests whether a scalar or low-dimensional vector time series is
jointly Gaussian, with null moments corrected for serial correlation, and
monitors streams online through recursive autoregressive prewhitening plus
an exponentially weighted kurtosis tracker.
"""

from .detect import Cusum, OnlineChangeDetector, StepResult
from .estimators import KurtosisNormalityTest, VarWhitener
from .stats import (
    CalibrationConfig,
    LagCovariance,
    NullMoments,
    TestVerdict,
    colored_bivariate_moments,
    colored_scalar_moments,
    default_max_lag,
    iid_moments,
    lag_covariance,
    multivariate_kurtosis,
    normality_test,
    test_series,
)
from .var import RecursiveLeastSquares, VarModel, fit_ols

__version__ = "0.1.0"

__all__ = [
    "CalibrationConfig",
    "Cusum",
    "KurtosisNormalityTest",
    "LagCovariance",
    "NullMoments",
    "OnlineChangeDetector",
    "RecursiveLeastSquares",
    "StepResult",
    "TestVerdict",
    "VarModel",
    "VarWhitener",
    "colored_bivariate_moments",
    "colored_scalar_moments",
    "default_max_lag",
    "fit_ols",
    "iid_moments",
    "lag_covariance",
    "multivariate_kurtosis",
    "normality_test",
    "test_series",
    "__version__",
]
