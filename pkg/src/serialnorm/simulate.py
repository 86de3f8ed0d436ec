"""Generators for benchmark inputs.

Covers low-pass AR design, VAR simulation with Gaussian or uniform
innovations, time embedding of scalar series, random orthonormal
projections, the switching-innovation change scenario, and CSV import and
export of series.

All generators are pure functions of their parameters and seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import var
from ._validation import as_series
from .exceptions import CsvFormatError, DesignError, InvalidDataError, SchemaError

# Half-power frequency (cycles per sample) of the filters used by the
# benchmark scenarios.  The source benchmarks quote their band edge relative
# to the Nyquist frequency, which puts it at a quarter of the sampling rate.
REFERENCE_CUTOFF = 0.125

# Frequency grid size for turning a target spectrum into autocovariances.
_GRID = 8192

# Sharpness of the reference spectrum grows with the designed order;
# this constant converts (order * cutoff) into a rolloff exponent.  The
# exponent saturates: past that point extra sharpness buys no realism, and
# higher-order fits lengthen their correlation through the fit order itself.
_SHARPNESS_PER_ORDER_CUTOFF = 1.6
_MAX_SHARPNESS = 4


@dataclass(frozen=True)
class InnovationSpec:
    """Zero-mean innovation distribution: standard normal or symmetric uniform."""

    kind: str
    dim: int
    half_width: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.kind == "uniform":
            if self.half_width is None or self.half_width <= 0:
                raise ValueError("uniform innovations need a positive half_width")

    @classmethod
    def gaussian(cls, dim: int) -> "InnovationSpec":
        return cls("gaussian", dim)

    @classmethod
    def uniform(cls, dim: int, low: float, high: float) -> "InnovationSpec":
        """Uniform on (low, high); bounds must be symmetric so the mean is zero."""
        if not low < high:
            raise ValueError(f"need low < high, got ({low}, {high})")
        if abs(low + high) > 1e-12 * max(abs(low), abs(high)):
            raise ValueError("uniform bounds must be symmetric about zero")
        return cls("uniform", dim, half_width=float(high))

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return 1.0
        return self.half_width**2 / 3.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal((n, self.dim))
        return rng.uniform(-self.half_width, self.half_width, size=(n, self.dim))


def _reference_power_spectrum(freqs: np.ndarray, cutoff: float, sharpness: int) -> np.ndarray:
    """All-pole style low-pass target with half power at ``cutoff``.

    The magnitude-squared response is 1 / (1 + (tan(pi f) / tan(pi fc))^2m);
    larger ``sharpness`` m gives a steeper rolloff.
    """
    scale = np.tan(np.pi * cutoff)
    with np.errstate(over="ignore", divide="ignore"):
        ratio = np.tan(np.pi * np.minimum(freqs, 0.5 - 1e-9)) / scale
        power = 1.0 / (1.0 + ratio ** (2 * sharpness))
    return power


def _target_autocovariance(cutoff: float, sharpness: int, n_lags: int) -> np.ndarray:
    freqs = np.fft.rfftfreq(2 * _GRID)
    power = _reference_power_spectrum(freqs, cutoff, sharpness)
    acov = np.fft.irfft(power, n=2 * _GRID)[: n_lags + 1]
    return acov


def design_sharpness(order: int, cutoff: float) -> int:
    """Rolloff exponent used by :func:`design_lowpass_ar` for a given order."""
    return min(_MAX_SHARPNESS, max(1, round(_SHARPNESS_PER_ORDER_CUTOFF * order * cutoff)))


def design_lowpass_ar(order: int, cutoff: float, sharpness: int | None = None) -> var.VarModel:
    """Design a stable scalar AR(order) low-pass with half power near ``cutoff``.

    The autocovariance of a reference low-pass spectrum is computed
    numerically and the order-p Yule-Walker system is solved for the
    coefficients.  The reference rolloff steepens with the requested order,
    since that is what an order-p all-pole filter can actually realize; pass
    ``sharpness`` to override.

    Parameters
    ----------
    order : int
        Number of autoregressive coefficients, at least 1.
    cutoff : float
        Half-power frequency in cycles per sample, in (0, 0.5).
    """
    p = int(order)
    if p < 1:
        raise ValueError("order must be at least 1")
    if not 0.0 < cutoff < 0.5:
        raise ValueError(f"cutoff must be in (0, 0.5), got {cutoff}")
    m = design_sharpness(p, cutoff) if sharpness is None else int(sharpness)
    acov = _target_autocovariance(cutoff, m, p)
    try:
        model, _ = var.from_autocovariance(acov[:, None, None], p)
    except Exception as exc:
        raise DesignError(f"Yule-Walker design failed for order {p}: {exc}") from exc
    if not model.is_stable():
        model = _reflect_unstable_roots(model)
    return model


def _reflect_unstable_roots(model: var.VarModel) -> var.VarModel:
    """Map roots outside the unit circle to their stable reciprocals."""
    a = model.coeffs[:, 0, 0]
    roots = np.roots(np.concatenate(([1.0], -a)))
    mags = np.abs(roots)
    outside = mags >= 1.0
    if not outside.any():
        return model
    roots[outside] = roots[outside] / mags[outside] ** 2 * (1.0 - 1e-9)
    poly = np.real(np.poly(roots))
    return var.VarModel((-poly[1:])[:, None, None])


def ar_power_spectrum(model: var.VarModel, freqs: np.ndarray, noise_var: float = 1.0) -> np.ndarray:
    """Power spectral density of a scalar AR model on the given frequencies."""
    if model.dim != 1:
        raise ValueError("spectrum helper only supports scalar models")
    a = model.coeffs[:, 0, 0]
    k = np.arange(1, a.size + 1)
    response = 1.0 - np.exp(-2j * np.pi * np.outer(freqs, k)) @ a.astype(complex)
    return noise_var / np.abs(response) ** 2


def model_autocovariance(model: var.VarModel, noise_var: float, n_lags: int) -> np.ndarray:
    """Theoretical autocovariance of a stable scalar AR model at lags 0..n_lags."""
    if model.dim != 1:
        raise ValueError("autocovariance helper only supports scalar models")
    freqs = np.fft.rfftfreq(2 * _GRID)
    power = ar_power_spectrum(model, freqs, noise_var)
    return np.fft.irfft(power, n=2 * _GRID)[: n_lags + 1]


def simulate_var(model: var.VarModel, n: int, spec: InnovationSpec, seed) -> np.ndarray:
    """Simulate ``n`` samples of a stable VAR driven by i.i.d. innovations.

    A burn-in of ``10 * order`` samples is generated and discarded so the
    output is effectively stationary.  Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if spec.dim != model.dim:
        raise ValueError(f"innovation dim {spec.dim} != model dim {model.dim}")
    if not model.is_stable():
        raise ValueError(
            f"refusing to simulate an unstable model (spectral radius "
            f"{model.spectral_radius():.4f})"
        )
    rng = np.random.default_rng(seed)
    burn = 10 * model.order
    eps = spec.sample(rng, n + burn)
    return var.filter_innovations(model.coeffs, eps)[burn:]


def embed(x, dim: int) -> np.ndarray:
    """Fold a scalar series into consecutive non-overlapping d-blocks.

    ``embed([1, 2, 3, 4], 2)`` gives ``[[1, 2], [3, 4]]``; a trailing
    remainder shorter than ``dim`` is dropped.
    """
    x = as_series(x, dim=1)[:, 0]
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if x.shape[0] < dim:
        raise ValueError(f"need at least {dim} samples, got {x.shape[0]}")
    m = x.shape[0] // dim
    return x[: m * dim].reshape(m, dim).copy()


def projection_matrix(dim: int, k: int, seed) -> np.ndarray:
    """Random ``dim x k`` matrix with orthonormal columns (rotation invariant)."""
    if not 1 <= k < dim:
        raise ValueError(f"need 1 <= k < dim, got k={k}, dim={dim}")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((dim, k))
    q, r = np.linalg.qr(gauss)
    return q * np.sign(np.diag(r))


def random_projection(x, k: int, seed) -> np.ndarray:
    """Project each observation onto a random k-dimensional subspace."""
    x = as_series(x)
    p = projection_matrix(x.shape[1], k, seed)
    return x @ p


def random_var_model(dim: int, order: int, seed, spectral_radius: float = 0.9) -> var.VarModel:
    """Seeded random VAR coefficients rescaled to a target companion radius.

    Scaling the lag-k block by ``c**k`` scales every companion eigenvalue by
    ``c``, so the construction hits the requested radius exactly.
    """
    if not 0.0 < spectral_radius < 1.0:
        raise ValueError("spectral_radius must be in (0, 1)")
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((order, dim, dim)) / np.sqrt(dim * order)
    rho = var.VarModel(coeffs).spectral_radius()
    scale = spectral_radius / rho
    powers = scale ** np.arange(1, order + 1)
    return var.VarModel(coeffs * powers[:, None, None])


@dataclass(frozen=True)
class ChangeScenario:
    """Innovation stream that switches distribution on [change_start, change_end)."""

    length: int
    change_start: int
    change_end: int
    base: InnovationSpec
    during: InnovationSpec
    model: var.VarModel

    def __post_init__(self):
        if not 0 < self.change_start < self.change_end <= self.length:
            raise ValueError(
                f"need 0 < change_start < change_end <= length, got "
                f"({self.change_start}, {self.change_end}, {self.length})"
            )
        if self.base.dim != 1 or self.during.dim != 1 or self.model.dim != 1:
            raise ValueError("change scenarios are scalar")


def default_change_scenario(
    length: int = 15000,
    change_start: int = 5000,
    change_end: int = 10000,
    order: int = 5,
    cutoff: float = REFERENCE_CUTOFF,
) -> ChangeScenario:
    """Unit-variance Gaussian innovations that switch to uniform(-sqrt3, sqrt3)
    on the change window, filtered throughout by a designed low-pass AR."""
    root3 = float(np.sqrt(3.0))
    return ChangeScenario(
        length=length,
        change_start=change_start,
        change_end=change_end,
        base=InnovationSpec.gaussian(1),
        during=InnovationSpec.uniform(1, -root3, root3),
        model=design_lowpass_ar(order, cutoff),
    )


def generate_change_scenario(scenario: ChangeScenario, seed) -> np.ndarray:
    """Realize a change scenario; returns an ``(length, 1)`` array.

    The filter runs through the whole stream (including a pre-change
    burn-in), so only the innovation distribution switches, not the
    second-order structure.
    """
    rng = np.random.default_rng(seed)
    burn = 10 * scenario.model.order
    n = scenario.length
    eps = scenario.base.sample(rng, burn + n)
    span = scenario.change_end - scenario.change_start
    # Sample indices are 1-based in the scenario definition.
    lo = burn + scenario.change_start - 1
    eps[lo : lo + span] = scenario.during.sample(rng, span)
    return var.filter_innovations(scenario.model.coeffs, eps)[burn:]


def save_series(path, x) -> None:
    """Write a series as CSV: one row per time step, header ``x1,...,xd``."""
    x = as_series(x)
    d = x.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(d)])
        for row in x:
            writer.writerow([f"{v:.17g}" for v in row])


def load_series(path, dim: int | None = None) -> np.ndarray:
    """Read a series CSV written by :func:`save_series`.

    Raises ``CsvFormatError`` with a line number on malformed content and
    ``SchemaError`` when ``dim`` disagrees with the file.
    """
    rows: list[list[float]] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(f"{path}: file is empty")
        width = len(header)
        expected = [f"x{i + 1}" for i in range(width)]
        if [h.strip() for h in header] != expected:
            raise CsvFormatError(
                f"{path}, line 1: expected header {','.join(expected)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise CsvFormatError(
                    f"{path}, line {lineno}: expected {width} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise CsvFormatError(f"{path}, line {lineno}: {exc}") from exc
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    if not np.isfinite(arr).all():
        raise InvalidDataError(f"{path}: non-finite values in series")
    if dim is not None and arr.shape[1] != dim:
        raise SchemaError(
            f"{path}: declared {dim} column(s) but file has {arr.shape[1]}"
        )
    return arr
