"""Online change detection on recursive regression residuals.

Each incoming observation is whitened by exponentially weighted recursive
least squares; the residual feeds an exponentially weighted covariance and
an exponentially weighted kurtosis, which is z-tested against null moments
evaluated at the equivalent uniform window length ``N_eff = 2 / (1 -
lambda2)``.  A cumulative log-likelihood-ratio baseline (uniform alternative
against a standard normal null) can be tracked alongside.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import stats
from ._validation import as_vector
from .exceptions import CalibrationError
from .var import RecursiveLeastSquares

#: Constant part of the per-sample log likelihood ratio of a unit-variance
#: uniform law against a standard normal: -ln(2 sqrt 3) + ln(2 pi) / 2.
CUSUM_OFFSET = -math.log(2.0 * math.sqrt(3.0)) + 0.5 * math.log(2.0 * math.pi)


class Cusum:
    """Cumulative sum of instantaneous log likelihood ratios.

    The per-sample term is ``-ln(2 sqrt 3) + ln(2 pi)/2 + e**2 / 2`` for a
    scalar residual ``e``: the likelihood ratio of a uniform(-sqrt3, sqrt3)
    alternative against a standard normal null.  The formula is applied as
    written even where the uniform density is zero (|e| > sqrt 3), which is
    exactly what makes the baseline uninformative on estimated residuals.
    """

    def __init__(self):
        self.total = 0.0

    def update(self, residual: float) -> float:
        e = float(residual)
        if not math.isfinite(e):
            raise ValueError("residual must be finite")
        self.total += CUSUM_OFFSET + 0.5 * e * e
        return self.total


@dataclass(frozen=True)
class StepResult:
    """Per-step detector output.

    ``status`` is ``"warming-up"`` until the regressor history and the
    kurtosis tracker have settled, ``"data-degenerate"`` when the residual
    covariance cannot be inverted (the previous verdict is held), and
    ``"ok"`` otherwise.  During warm-up ``reject`` is always False.
    """

    t: int
    status: str
    z: float | None
    p_value: float | None
    reject: bool
    kurtosis: float | None
    cusum: float | None

    def to_record(self) -> dict:
        """JSON-safe dict with keys t, z, p_value, reject, B, s_cusum, status."""

        def _num(v):
            return None if v is None or not math.isfinite(v) else float(v)

        return {
            "t": self.t,
            "z": _num(self.z),
            "p_value": _num(self.p_value),
            "reject": bool(self.reject),
            "B": _num(self.kurtosis),
            "s_cusum": _num(self.cusum),
            "status": self.status,
        }


def dump_jsonl(results, fh) -> None:
    """Serialize step results as JSON lines."""
    for res in results:
        fh.write(json.dumps(res.to_record()))
        fh.write("\n")


class OnlineChangeDetector(BaseEstimator):
    """Streaming normality monitor for a d-variate series.

    Parameters
    ----------
    dim : int
        Dimension of the observations (1 or 2 for colored moments).
    order : int
        Order of the recursive autoregressive prewhitener.
    lambda1 : float
        Forgetting factor of the recursive least squares stage, in (0, 1).
    lambda2 : float
        Forgetting factor of the kurtosis tracker, in (0, 1).  The null
        moments are evaluated at ``N_eff = 2 / (1 - lambda2)``.
    lambda_cov : float or None
        Forgetting factor of the residual covariance and of the running lag
        covariances.  Defaults to ``lambda2`` so the covariance is averaged
        over the same window as the kurtosis it normalizes, which is what
        keeps the z-scores calibrated; pass ``lambda1`` explicitly to couple
        it to the whitening stage instead.
    alpha : float
        Test level of the per-step two-sided z-test.
    delta : float
        Ridge used to initialize the inverse Gram matrix of the whitener.
    moment_mode : str
        ``"colored"`` (running lag-covariance corrections) or ``"iid"``.
    max_lag : int or None
        Truncation of the running lag covariances (default min(N_eff-1, 50)).
    refresh_every : int or None
        For bivariate colored moments the bootstrap calibration is refreshed
        at this step interval (default N_eff / 4); scalar formulas are cheap
        and recomputed every step.
    calibration : stats.CalibrationConfig or None
        Bootstrap settings for the bivariate colored moments.
    with_cusum : bool
        Track the cumulative log-likelihood-ratio baseline on the first
        residual coordinate.

    One detector serves one stream; updates are strictly sequential.
    """

    def __init__(
        self,
        dim: int,
        order: int = 5,
        lambda1: float = 0.99,
        lambda2: float = 0.998,
        lambda_cov: float | None = None,
        alpha: float = 0.05,
        delta: float = 1.0,
        moment_mode: str = "colored",
        max_lag: int | None = None,
        refresh_every: int | None = None,
        calibration: stats.CalibrationConfig | None = None,
        with_cusum: bool = True,
    ):
        self.dim = dim
        self.order = order
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda_cov = lambda_cov
        self.alpha = alpha
        self.delta = delta
        self.moment_mode = moment_mode
        self.max_lag = max_lag
        self.refresh_every = refresh_every
        self.calibration = calibration
        self.with_cusum = with_cusum
        self._validate()
        self.reset()

    def _validate(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.order < 1:
            raise ValueError("order must be at least 1")
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if self.lambda_cov is not None and not 0.0 < self.lambda_cov < 1.0:
            raise ValueError(f"lambda_cov must be in (0, 1), got {self.lambda_cov}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.moment_mode not in ("colored", "iid"):
            raise ValueError(f"moment_mode must be 'colored' or 'iid', got {self.moment_mode!r}")
        if self.moment_mode == "colored" and self.dim > 2:
            raise ValueError(
                "colored moments are implemented for dim 1 and 2; project the "
                "stream or use moment_mode='iid'"
            )

    @property
    def n_effective(self) -> float:
        """Uniform window length with the same estimator variance: 2/(1 - lambda2)."""
        return 2.0 / (1.0 - self.lambda2)

    @property
    def warmup_end(self) -> int:
        """Steps before this index are never reported as alarms.

        The kurtosis tracker starts at zero, far below its null mean, so its
        early transient would otherwise read as a rejection.
        """
        return self.order + int(math.ceil(self.n_effective / 4.0))

    def reset(self):
        """Return the detector to its initial state (covariance = identity,
        kurtosis = 0, whitener re-ridged)."""
        self.rls_ = RecursiveLeastSquares(self.dim, self.order, self.lambda1, self.delta)
        self.cov_ = np.eye(self.dim)
        self.kurtosis_ = 0.0
        self.t_ = 0
        self._lcov = self.lambda_cov if self.lambda_cov is not None else self.lambda2
        self._n_eff = int(round(self.n_effective))
        self._max_lag = (
            self.max_lag if self.max_lag is not None else stats.default_max_lag(self._n_eff)
        )
        self._lag_mats = np.zeros((self._max_lag, self.dim, self.dim))
        self._recent = np.zeros((self._max_lag, self.dim))
        self._n_recent = 0
        self._refresh = self.refresh_every if self.refresh_every is not None else max(
            1, self._n_eff // 4
        )
        self._cached_moments: stats.NullMoments | None = None
        self._next_refresh = 0
        self.cusum_ = Cusum() if self.with_cusum else None
        self.last_result_: StepResult | None = None
        return self

    def step(self, x) -> StepResult:
        """Consume one observation and return the per-step result."""
        x = as_vector(x, self.dim)
        self.t_ += 1
        t = self.t_
        residual = self.rls_.update(x)
        if residual is None:
            result = StepResult(t, "warming-up", None, None, False, None, self._cusum_value())
            self.last_result_ = result
            return result

        lcov = self._lcov
        self.cov_ = lcov * self.cov_ + (1.0 - lcov) * np.outer(residual, residual)
        self._update_lag_covariances(residual, lcov)
        cusum_value = self._cusum_value(residual)

        if not self._covariance_usable():
            prev = self.last_result_
            result = StepResult(
                t,
                "data-degenerate",
                prev.z if prev else None,
                prev.p_value if prev else None,
                False if prev is None else prev.reject,
                self.kurtosis_,
                cusum_value,
            )
            self.last_result_ = result
            return result

        quad = float(residual @ np.linalg.solve(self.cov_, residual))
        self.kurtosis_ = self.lambda2 * self.kurtosis_ + (1.0 - self.lambda2) * quad**2

        moments = self._current_moments(t)
        verdict = stats.normality_test(self.kurtosis_, moments, self.alpha)
        warming = t < self.warmup_end
        result = StepResult(
            t,
            "warming-up" if warming else "ok",
            verdict.z,
            verdict.p_value,
            False if warming else verdict.reject,
            self.kurtosis_,
            cusum_value,
        )
        self.last_result_ = result
        return result

    def process(self, xs) -> list[StepResult]:
        """Feed a whole series through :meth:`step`."""
        return [self.step(row) for row in np.atleast_2d(np.asarray(xs, dtype=float))]

    def _cusum_value(self, residual=None) -> float | None:
        if self.cusum_ is None:
            return None
        if residual is None:
            return self.cusum_.total
        return self.cusum_.update(float(residual[0]))

    def _update_lag_covariances(self, residual: np.ndarray, lcov: float):
        if self._max_lag == 0:
            return
        available = min(self._n_recent, self._max_lag)
        self._lag_mats *= lcov
        if available:
            outer = residual[None, :, None] * self._recent[:available, None, :]
            self._lag_mats[:available] += (1.0 - lcov) * outer
        self._recent = np.roll(self._recent, 1, axis=0)
        self._recent[0] = residual
        self._n_recent += 1

    def _covariance_usable(self) -> bool:
        cond = np.linalg.cond(self.cov_)
        return bool(np.isfinite(cond) and cond <= stats.MAX_CONDITION)

    def _current_moments(self, t: int) -> stats.NullMoments:
        n = self._n_eff
        if self.moment_mode == "iid":
            if self._cached_moments is None:
                self._cached_moments = stats.iid_moments(self.dim, n)
            return self._cached_moments
        cov = stats.LagCovariance(np.concatenate(([self.cov_], self._lag_mats)))
        if self.dim == 1:
            return stats.colored_scalar_moments(cov, n)
        if t >= self._next_refresh or self._cached_moments is None:
            base = self.calibration if self.calibration is not None else stats.CalibrationConfig()
            calib = stats.CalibrationConfig(
                replicates=base.replicates,
                seed=base.seed + t,  # deterministic per refresh point
                fit_order=base.fit_order,
            )
            try:
                self._cached_moments = stats.colored_bivariate_moments(cov, n, calib)
            except CalibrationError:
                if self._cached_moments is None:
                    self._cached_moments = stats.NullMoments(
                        8.0 - 16.0 / n, 64.0 / n, "colored_bivariate_bootstrap"
                    )
            self._next_refresh = t + self._refresh
        return self._cached_moments
