"""Vector autoregression tools.

Batch least squares fitting, residual extraction, autocovariance-matched
(Yule-Walker) fits, a simulation kernel, and exponentially weighted
recursive least squares for online prewhitening.

The model convention throughout is

    x(t) = A_1 x(t-1) + ... + A_p x(t-p) + e(t)

with ``d x d`` coefficient matrices ``A_k`` and innovations ``e(t)``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as spsignal

from ._validation import as_series, as_vector
from .exceptions import (
    CalibrationError,
    NumericOverflowError,
    RankDeficiencyError,
    SchemaError,
)


@dataclass(frozen=True)
class VarModel:
    """Coefficients of an order-p vector autoregression.

    ``coeffs`` has shape ``(order, dim, dim)``; ``coeffs[k - 1]`` multiplies
    the observation ``k`` steps in the past.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"coeffs must have shape (order, dim, dim), got {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("order must be at least 1")
        if not np.isfinite(arr).all():
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    def companion(self) -> np.ndarray:
        """Companion form: block row of coefficients over shifted identities."""
        p, d = self.order, self.dim
        comp = np.zeros((d * p, d * p))
        comp[:d] = np.concatenate(list(self.coeffs), axis=1)
        if p > 1:
            comp[d:, : d * (p - 1)] = np.eye(d * (p - 1))
        return comp

    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.companion())).max())

    def is_stable(self, margin: float = 0.0) -> bool:
        return self.spectral_radius() < 1.0 - margin

    def residuals(self, x) -> np.ndarray:
        """One-step prediction errors ``x(t) - sum_k A_k x(t-k)``.

        The first ``order`` observations only prime the regressor; the output
        has ``n - order`` rows.
        """
        x = as_series(x, dim=self.dim)
        n, _ = x.shape
        p = self.order
        if n <= p:
            raise ValueError(f"need more than order={p} observations, got {n}")
        pred = np.zeros((n - p, self.dim))
        for k in range(1, p + 1):
            pred += x[p - k : n - k] @ self.coeffs[k - 1].T
        return x[p:] - pred


def fit_ols(x, order: int) -> VarModel:
    """Fit a VAR(order) by ordinary least squares.

    Minimizes the squared prediction error over all coefficient matrices;
    the normal equations hold at the solution, so the residuals are
    orthogonal to the stacked regressors.
    """
    x = as_series(x)
    n, d = x.shape
    p = int(order)
    if p < 1:
        raise ValueError("order must be at least 1")
    if n <= d * p + 1:
        raise ValueError(f"need more than dim*order+1={d * p + 1} observations, got {n}")
    design = _design_matrix(x, p)
    target = x[p:]
    solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < d * p:
        raise RankDeficiencyError(
            f"design matrix rank {rank} < {d * p}; regressors are collinear"
        )
    coeffs = np.stack([solution[(k - 1) * d : k * d].T for k in range(1, p + 1)])
    return VarModel(coeffs)


def _design_matrix(x: np.ndarray, p: int) -> np.ndarray:
    n = x.shape[0]
    return np.concatenate([x[p - k : n - k] for k in range(1, p + 1)], axis=1)


def from_autocovariance(acov, order: int) -> tuple[VarModel, np.ndarray]:
    """Fit a VAR(order) whose autocovariance matches ``acov`` at lags 0..order.

    Parameters
    ----------
    acov : array (n_lags + 1, dim, dim)
        Covariance function ``C(tau) = E[x(t) x(t - tau)']`` for
        ``tau = 0..n_lags`` with ``n_lags >= order``.
    order : int
        Model order.

    Returns
    -------
    (model, noise_cov)
        The fitted model and the implied innovation covariance.

    Raises
    ------
    CalibrationError
        If the linear system is singular, the implied innovation covariance
        is not positive semidefinite, or the fitted model is unstable.
    """
    acov = np.asarray(acov, dtype=float)
    if acov.ndim != 3 or acov.shape[1] != acov.shape[2]:
        raise ValueError(f"acov must have shape (n_lags + 1, dim, dim), got {acov.shape}")
    p = int(order)
    if p < 1:
        raise ValueError("order must be at least 1")
    if acov.shape[0] < p + 1:
        raise ValueError(f"need lags 0..{p}, got only {acov.shape[0] - 1}")
    d = acov.shape[1]

    def cov(tau: int) -> np.ndarray:
        return acov[tau] if tau >= 0 else acov[-tau].T

    # Block system: [C(1) .. C(p)] = [A_1 .. A_p] G with G[k, j] = C(j - k).
    gram = np.block([[cov(j - k) for j in range(1, p + 1)] for k in range(1, p + 1)])
    rhs = np.concatenate([cov(tau) for tau in range(1, p + 1)], axis=1)
    try:
        stacked = np.linalg.solve(gram, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise CalibrationError(f"autocovariance system is singular: {exc}") from exc

    coeffs = np.stack([stacked[:, (k - 1) * d : k * d] for k in range(1, p + 1)])
    model = VarModel(coeffs)
    radius = model.spectral_radius()
    if radius >= 1.0:
        raise CalibrationError(f"fitted model is unstable (spectral radius {radius:.4f})")

    noise = cov(0) - sum(coeffs[k - 1] @ cov(k).T for k in range(1, p + 1))
    noise = 0.5 * (noise + noise.T)
    eigvals = np.linalg.eigvalsh(noise)
    scale = max(abs(eigvals).max(), 1.0)
    if eigvals.min() < -1e-8 * scale:
        raise CalibrationError(
            f"implied innovation covariance is indefinite (min eigenvalue {eigvals.min():.3e})"
        )
    if eigvals.min() < 0:
        # Round-off only: project back onto the PSD cone.
        w, v = np.linalg.eigh(noise)
        noise = (v * np.clip(w, 0.0, None)) @ v.T
    return model, noise


def filter_innovations(coeffs: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Drive the autoregression with given innovations, starting from rest.

    ``eps`` has shape ``(..., n, dim)``; leading axes are independent
    replicates.  Returns an array of the same shape.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    p, d, _ = coeffs.shape
    eps = np.asarray(eps, dtype=float)
    if d == 1:
        poly = np.concatenate(([1.0], -coeffs[:, 0, 0]))
        return spsignal.lfilter([1.0], poly, eps[..., 0], axis=-1)[..., None]
    lead = eps.shape[:-2]
    n = eps.shape[-2]
    flat = eps.reshape((-1, n, d))
    buf = np.zeros((flat.shape[0], p + n, d))
    for t in range(n):
        window = buf[:, t : t + p][:, ::-1]  # index 0 is x(t-1)
        buf[:, p + t] = flat[:, t] + np.einsum("rkd,kcd->rc", window, coeffs)
    return buf[:, p:].reshape(lead + (n, d))


class RecursiveLeastSquares:
    """Exponentially weighted recursive least squares for VAR coefficients.

    The inverse Gram matrix is propagated with the matrix inversion lemma:
    with regressor ``z`` built from the last ``order`` observations,

        u = P z / lambda1,  b = 1 / (1 + z' u),
        P <- P / lambda1 - b u u',  W <- W + (b u) e',

    where ``e = x(t) - W' z`` is the a-priori residual that ``update``
    returns.  With ``lambda1 = 1`` and a small ridge the trajectory
    reproduces growing-window ordinary least squares.

    The first ``order`` observations only fill the regressor history and
    produce no update (``update`` returns None).
    """

    def __init__(self, dim: int, order: int, lambda1: float = 0.99, delta: float = 1.0):
        if dim < 1 or order < 1:
            raise ValueError("dim and order must be at least 1")
        if not 0.0 < lambda1 <= 1.0:
            raise ValueError(f"lambda1 must be in (0, 1], got {lambda1}")
        if delta <= 0.0:
            raise ValueError(f"delta must be positive, got {delta}")
        self.dim = int(dim)
        self.order = int(order)
        self.lambda1 = float(lambda1)
        self.delta = float(delta)
        self.gram_inv = np.eye(dim * order) / delta
        self.weights = np.zeros((dim * order, dim))
        self._past: deque[np.ndarray] = deque(maxlen=order)  # most recent first
        self.n_seen = 0

    @property
    def ready(self) -> bool:
        """True once the regressor history holds ``order`` observations."""
        return len(self._past) == self.order

    def regressor(self) -> np.ndarray:
        """Stacked past observations ``[x(t-1); ...; x(t-order)]``."""
        if not self.ready:
            raise ValueError("regressor history is not full yet")
        return np.concatenate(list(self._past))

    def update(self, x) -> np.ndarray | None:
        """Consume one observation; return the a-priori residual (or None
        while the history is still filling)."""
        x = as_vector(x, self.dim)
        self.n_seen += 1
        if not self.ready:
            self._past.appendleft(x)
            return None
        z = self.regressor()
        u = self.gram_inv @ z / self.lambda1
        b = 1.0 / (1.0 + z @ u)
        residual = x - self.weights.T @ z
        self.weights = self.weights + np.outer(b * u, residual)
        gram_inv = self.gram_inv / self.lambda1 - b * np.outer(u, u)
        self.gram_inv = 0.5 * (gram_inv + gram_inv.T)
        if not (np.isfinite(self.gram_inv).all() and np.isfinite(self.weights).all()):
            raise NumericOverflowError("recursive update produced non-finite state")
        self._past.appendleft(x)
        return residual

    def model(self) -> VarModel:
        """Current coefficient estimate as a model object."""
        d = self.dim
        coeffs = np.stack(
            [self.weights[(k - 1) * d : k * d].T for k in range(1, self.order + 1)]
        )
        return VarModel(coeffs)


def model_to_dict(model: VarModel, lambda1: float = 1.0, delta: float = 1e-6) -> dict:
    """JSON-safe representation: {d, p, A (row-major per lag), lambda1, delta}."""
    return {
        "d": model.dim,
        "p": model.order,
        "A": [mat.ravel().tolist() for mat in model.coeffs],
        "lambda1": float(lambda1),
        "delta": float(delta),
    }


def model_from_dict(obj: dict) -> tuple[VarModel, float, float]:
    """Inverse of :func:`model_to_dict`; returns ``(model, lambda1, delta)``."""
    try:
        d = int(obj["d"])
        p = int(obj["p"])
        flat = obj["A"]
        lambda1 = float(obj["lambda1"])
        delta = float(obj["delta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"model record is missing or malformed: {exc}") from exc
    if len(flat) != p:
        raise SchemaError(f"expected {p} coefficient blocks, got {len(flat)}")
    try:
        coeffs = np.array([np.asarray(block, dtype=float).reshape(d, d) for block in flat])
    except ValueError as exc:
        raise SchemaError(f"coefficient block does not reshape to {d}x{d}: {exc}") from exc
    return VarModel(coeffs), lambda1, delta


def save_model(model: VarModel, path, lambda1: float = 1.0, delta: float = 1e-6) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, lambda1, delta), fh, indent=2)
        fh.write("\n")


def load_model(path) -> tuple[VarModel, float, float]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    return model_from_dict(obj)
