"""Kurtosis-based normality statistics and their null-hypothesis moments.

For a zero-mean d-variate sample ``x(1..N)`` the test statistic is the
normalized fourth moment

    b = (1/N) * sum_n (x(n)' S^-1 x(n))**2,   S = (1/N) * sum_n x(n) x(n)',

a multivariate kurtosis in Mardia's sense.  Under joint normality of
independent samples its asymptotic mean and variance are ``d (d + 2)`` and
``8 d (d + 2) / N``; serial correlation changes both.  This module provides
the statistic, the sample lag covariance it needs, and three interchangeable
null-moment models:

* :func:`iid_moments` -- the classical white-sample values;
* :func:`colored_scalar_moments` -- closed-form corrections for a serially
  correlated scalar sample, driven by the normalized lag covariances;
* :func:`colored_bivariate_moments` -- moments for a serially correlated
  bivariate sample.  The correction coefficients have no closed form here,
  so the default is a parametric bootstrap against a Gaussian process whose
  covariance function matches the data; precomputed coefficient tables are
  accepted as a plug-in.

:func:`normality_test` turns a statistic plus null moments into a two-sided
z-test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy import stats as spstats

from . import var
from ._validation import as_series, centered
from .exceptions import CalibrationError, DegenerateDataError

#: Refuse to invert sample covariances with a worse condition estimate.
MAX_CONDITION = 1e12

#: Normalized lag covariances below this magnitude are treated as zero in the
#: correction sums; sample estimates at that level are dominated by noise.
NEGLIGIBLE_CORRELATION = 0.01

#: Above this normalized correlation the bivariate bootstrap is trusted
#: outright; between the two thresholds it is blended toward the white-sample
#: closed form.
BLEND_FULL_CORRELATION = 0.05


def default_max_lag(n: int) -> int:
    """Default truncation for correction sums: min(n - 1, 50).

    The asymptotic sums formally run over all lags, but sample covariances at
    large lags carry only estimator noise, so they are cut off.
    """
    return min(n - 1, 50)


@dataclass(frozen=True)
class LagCovariance:
    """Sample covariance function ``C(tau) = E[x(t) x(t - tau)']``.

    ``mats`` has shape ``(max_lag + 1, dim, dim)``; ``mats[0]`` is the
    (symmetrized) zero-lag covariance.
    """

    mats: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.mats, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"mats must have shape (max_lag + 1, dim, dim), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("lag covariances must be finite")
        object.__setattr__(self, "mats", arr)

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    @property
    def max_lag(self) -> int:
        return self.mats.shape[0] - 1


@dataclass(frozen=True)
class NullMoments:
    """Mean and variance of the kurtosis statistic under the normal null."""

    mean: float
    variance: float
    source: str  # iid_formula | colored_scalar_formula | colored_bivariate_bootstrap | user_supplied

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not self.mean > 0:
            raise ValueError(f"mean must be positive, got {self.mean}")


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of the two-sided z-test at level ``alpha``."""

    z: float
    p_value: float
    reject: bool
    alpha: float


@dataclass(frozen=True)
class CalibrationConfig:
    """Settings for the bivariate bootstrap calibration.

    ``fit_order`` bounds the order of the covariance-matching fit; a pairwise
    embedding of a scalar AR(2k) is exactly a bivariate VAR(k), so the
    default of 10 covers embedded scalar models up to order 20.
    """

    replicates: int = 500
    seed: int = 0
    fit_order: int = 10

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("need at least 2 bootstrap replicates")
        if self.fit_order < 1:
            raise ValueError("fit_order must be at least 1")


def lag_covariance(x, max_lag: int) -> LagCovariance:
    """Sample lag covariances ``(1/N) sum_{t>tau} x(t) x(t-tau)'``.

    The series is assumed already centered (callers subtract the sample mean
    first).  The 1/N normalization keeps the scalar sequence positive
    semidefinite, which downstream fits rely on.
    """
    x = as_series(x)
    n, _ = x.shape
    max_lag = int(max_lag)
    if not 0 <= max_lag < n:
        raise ValueError(f"need 0 <= max_lag < n_samples, got max_lag={max_lag}, n={n}")
    mats = np.stack([x[tau:].T @ x[: n - tau] / n for tau in range(max_lag + 1)])
    mats[0] = 0.5 * (mats[0] + mats[0].T)
    return LagCovariance(mats)


def multivariate_kurtosis(x) -> float:
    """Normalized fourth moment ``(1/N) sum (x' S^-1 x)**2``.

    Invariant under any invertible linear transform of the observations.
    The sample second moment ``S`` is inverted through a symmetric
    factorization; badly conditioned ``S`` raises ``DegenerateDataError``
    with the condition estimate.
    """
    x = as_series(x)
    n, d = x.shape
    if n <= d:
        raise ValueError(f"need more samples than dimensions, got n={n}, d={d}")
    s = x.T @ x / n
    cond = float(np.linalg.cond(s))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise DegenerateDataError(
            f"sample covariance condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )
    try:
        factor = linalg.cho_factor(s, lower=True)
    except linalg.LinAlgError as exc:
        raise DegenerateDataError(f"sample covariance is not positive definite: {exc}") from exc
    w = linalg.cho_solve(factor, x.T)
    quad = np.einsum("dn,dn->n", x.T, w)
    return float(np.mean(quad**2))


def iid_moments(d: int, n: int) -> NullMoments:
    """Null moments for independent samples: mean d(d+2), variance 8d(d+2)/n."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be at least 1")
    mean = float(d * (d + 2))
    variance = 8.0 * d * (d + 2) / n
    return NullMoments(mean, variance, "iid_formula")


def colored_scalar_moments(
    cov: LagCovariance, n: int, min_rel: float = NEGLIGIBLE_CORRELATION
) -> NullMoments:
    """Null moments of the scalar kurtosis under serial correlation.

    With ``r(tau) = C(tau) / C(0)`` the corrections are

        mean = 3 - 6/n - (12/n**2) * sum_tau (n - tau) r(tau)**2
        var  = (24/n) * (1 + (2/n) * sum_tau (n - tau) r(tau)**4)

    summed over ``tau = 1..max_lag``.  Lags with ``|r| < min_rel`` are
    dropped as estimator noise; with all lags zero the white-sample values
    ``(3 - 6/n, 24/n)`` are returned exactly.
    """
    if cov.dim != 1:
        raise ValueError(f"scalar moments need dim=1 covariances, got dim={cov.dim}")
    if n < 1:
        raise ValueError("n must be at least 1")
    s0 = cov.mats[0, 0, 0]
    if not s0 > 0:
        raise DegenerateDataError(f"zero-lag covariance must be positive, got {s0}")
    taus = np.arange(1, min(cov.max_lag, n - 1) + 1)
    ratios = cov.mats[1 : taus.size + 1, 0, 0] / s0
    if np.abs(ratios).max(initial=0.0) > 1.0 + 1e-9:
        raise ValueError("normalized lag covariances exceed 1; covariance is inconsistent")
    ratios = np.where(np.abs(ratios) < min_rel, 0.0, ratios)
    weights = n - taus
    mean = 3.0 - 6.0 / n - (12.0 / n**2) * float(weights @ ratios**2)
    variance = (24.0 / n) * (1.0 + (2.0 / n) * float(weights @ ratios**4))
    return NullMoments(mean, variance, "colored_scalar_formula")


def colored_bivariate_moments(
    cov: LagCovariance,
    n: int,
    calibration: CalibrationConfig | None = None,
    q1=None,
    q2=None,
    min_rel: float = NEGLIGIBLE_CORRELATION,
) -> NullMoments:
    """Null moments of the bivariate kurtosis under serial correlation.

    The leading terms are ``mean = 8 - 16/n`` and ``variance = 64/n``; the
    correction terms involve coefficient sequences that combine all entries
    of the lag covariance function and are not available in closed form
    here.  Two routes are supported:

    * ``q1``/``q2`` given: per-lag correction coefficients supplied by the
      caller are summed directly,

          mean = 8 - 16/n - (4/n**2)  * sum (n - tau) q1[tau-1] / det**2
          var  = 64/n     + (16/n**2) * sum (n - tau) q2[tau-1] / det**4

      with ``det`` the determinant of the zero-lag covariance.

    * otherwise: parametric bootstrap.  A VAR is fitted to the covariance
      function, ``calibration.replicates`` Gaussian processes of length
      ``n`` are simulated, and the empirical mean and variance of the
      statistic are returned.  When every normalized lag covariance is below
      ``min_rel`` the exact white-sample values are returned instead, and in
      between the bootstrap is blended toward them so the estimate degrades
      smoothly to the closed form as correlations vanish.

    Raises ``DegenerateDataError`` for a non positive definite zero-lag
    covariance and ``CalibrationError`` when the covariance-matching fit is
    unstable.
    """
    if cov.dim != 2:
        raise ValueError(f"bivariate moments need dim=2 covariances, got dim={cov.dim}")
    if n < 1:
        raise ValueError("n must be at least 1")
    s0 = cov.mats[0]
    eigvals = np.linalg.eigvalsh(s0)
    if eigvals.min() <= 0:
        raise DegenerateDataError(
            f"zero-lag covariance must be positive definite (eigenvalues {eigvals})"
        )
    white_mean = 8.0 - 16.0 / n
    white_var = 64.0 / n

    if (q1 is None) != (q2 is None):
        raise ValueError("q1 and q2 must be supplied together")
    if q1 is not None:
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        if q1.shape != q2.shape or q1.ndim != 1:
            raise ValueError("q1 and q2 must be 1-D arrays of equal length")
        det = float(np.linalg.det(s0))
        taus = np.arange(1, q1.size + 1)
        weights = np.clip(n - taus, 0, None)
        mean = white_mean - (4.0 / n**2) * float(weights @ q1) / det**2
        variance = white_var + (16.0 / n**2) * float(weights @ q2) / det**4
        return NullMoments(mean, variance, "user_supplied")

    scale = np.sqrt(np.outer(np.diag(s0), np.diag(s0)))
    rel = np.abs(cov.mats[1:]) / scale
    rho = float(rel.max()) if rel.size else 0.0
    if rho < min_rel:
        return NullMoments(white_mean, white_var, "colored_bivariate_bootstrap")

    calib = calibration if calibration is not None else CalibrationConfig()
    boot_mean, boot_var = _bootstrap_moments(cov, n, calib)
    weight = min(1.0, rho / BLEND_FULL_CORRELATION)
    mean = weight * boot_mean + (1.0 - weight) * white_mean
    variance = weight * boot_var + (1.0 - weight) * white_var
    return NullMoments(mean, variance, "colored_bivariate_bootstrap")


def _bootstrap_moments(cov: LagCovariance, n: int, calib: CalibrationConfig) -> tuple[float, float]:
    order = min(calib.fit_order, cov.max_lag)
    model, noise = var.from_autocovariance(cov.mats[: order + 1], order)
    # A tiny jitter keeps the factorization defined when the implied
    # innovation covariance is only semidefinite.
    jitter = 1e-12 * max(np.trace(noise), 1e-30)
    try:
        chol = np.linalg.cholesky(noise + jitter * np.eye(2))
    except np.linalg.LinAlgError as exc:
        raise CalibrationError(f"innovation covariance factorization failed: {exc}") from exc
    rng = np.random.default_rng(calib.seed)
    burn = 10 * order
    eps = rng.standard_normal((calib.replicates, n + burn, 2)) @ chol.T
    sims = var.filter_innovations(model.coeffs, eps)[:, burn:]
    sims = sims - sims.mean(axis=1, keepdims=True)
    values = _kurtosis_batch(sims)
    return float(values.mean()), float(values.var(ddof=1))


def _kurtosis_batch(xs: np.ndarray) -> np.ndarray:
    """Bivariate kurtosis of each replicate in an (R, n, 2) array."""
    n = xs.shape[1]
    s = np.einsum("rnd,rne->rde", xs, xs) / n
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] ** 2
    if not (det > 0).all():
        raise CalibrationError("a bootstrap replicate produced a singular covariance")
    x1, x2 = xs[..., 0], xs[..., 1]
    quad = (
        s[:, 1, 1, None] * x1**2 - 2.0 * s[:, 0, 1, None] * x1 * x2 + s[:, 0, 0, None] * x2**2
    ) / det[:, None]
    return (quad**2).mean(axis=1)


def normality_test(statistic: float, moments: NullMoments, alpha: float) -> TestVerdict:
    """Two-sided z-test of the kurtosis statistic against its null moments.

    ``z = (statistic - mean) / sqrt(variance)``; the p-value is
    ``2 (1 - Phi(|z|))`` and the null is rejected when it is strictly below
    ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    z = (float(statistic) - moments.mean) / np.sqrt(moments.variance)
    p_value = float(2.0 * spstats.norm.sf(abs(z)))
    return TestVerdict(z=float(z), p_value=p_value, reject=bool(p_value < alpha), alpha=float(alpha))


def test_series(
    x,
    alpha: float = 0.05,
    moments: str | NullMoments = "colored",
    max_lag: int | None = None,
    calibration: CalibrationConfig | None = None,
    center: bool = True,
) -> tuple[float, NullMoments, TestVerdict]:
    """Convenience wrapper: center, compute the statistic, pick moments, test.

    ``moments`` is ``"colored"``, ``"iid"``, or a ready ``NullMoments``
    instance (user supplied).  Colored moments are available for scalar and
    bivariate series; higher-dimensional colored data should be projected
    onto one or two dimensions first.
    """
    x = as_series(x)
    if center:
        x = centered(x)
    n, d = x.shape
    b = multivariate_kurtosis(x)
    if isinstance(moments, NullMoments):
        mom = moments
    elif moments == "iid":
        mom = iid_moments(d, n)
    elif moments == "colored":
        if d == 1:
            cov = lag_covariance(x, default_max_lag(n) if max_lag is None else max_lag)
            mom = colored_scalar_moments(cov, n)
        elif d == 2:
            cov = lag_covariance(x, default_max_lag(n) if max_lag is None else max_lag)
            mom = colored_bivariate_moments(cov, n, calibration)
        else:
            raise ValueError(
                "colored moments are implemented for dim 1 and 2; project "
                "higher-dimensional data onto a random line or plane first"
            )
    else:
        raise ValueError(f"unknown moments mode {moments!r}")
    return b, mom, normality_test(b, mom, alpha)
