"""Monte Carlo benchmarks and the change-detection demonstration.

``run_rejection_experiment`` reproduces the empirical rejection-rate tables
(direct tests on colored data, tests on regression residuals with known or
misspecified order, and tests on random low-dimensional projections);
``run_change_demo`` produces the streaming trajectory of the online
detector on a synthetic distribution change; ``test_csv`` runs the tests on
a user-provided series file.

Every entry point is deterministic for a fixed master seed: per-simulation
generators are spawned from a ``numpy.random.SeedSequence`` of the master
seed, so simulations are independent and could be evaluated in any order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import simulate, stats, var
from ._validation import centered
from .detect import OnlineChangeDetector
from .exceptions import SchemaError
from .simulate import (
    REFERENCE_CUTOFF,
    InnovationSpec,
    default_change_scenario,
    design_lowpass_ar,
    embed,
    generate_change_scenario,
    load_series,
    projection_matrix,
    random_var_model,
    simulate_var,
)

ALL_TESTS = ("B1_iid", "B1_colored", "B2_colored")
TABLE_EXPERIMENTS = ("table1", "table2", "table3", "table4", "table5")

#: Half width of the uniform innovations in the scalar benchmarks (variance 1).
SCALAR_UNIFORM_HALF_WIDTH = float(np.sqrt(3.0))

#: Half width of the uniform innovations in the 3-D benchmarks.
VECTOR_UNIFORM_HALF_WIDTH = 2.0

#: Companion spectral radius of the seeded random 3-D benchmark models.
#: Kept moderate so the filtering does not wash the innovation shape out of
#: the observations entirely.
VAR3_SPECTRAL_RADIUS = 0.82


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one rejection-rate experiment.

    ``experiment`` selects the protocol: ``table1`` (direct tests on scalar
    AR(4)/AR(14) data), ``table2`` (direct, AR(20)), ``table3`` (tests on
    least squares residuals of AR(20), known and misspecified order),
    ``table4`` (random 1-D/2-D projections of a 3-D VAR(5)), ``table5``
    (projections of a 3-D VAR(20) and of its estimated residuals).  Ad-hoc
    tests on files are served by :func:`test_csv` instead.
    """

    experiment: str
    n_sims: int | None = None
    n_samples: int = 1000
    alpha: float = 0.05
    seed: int = 0
    tests: tuple[str, ...] = ALL_TESTS
    distributions: tuple[str, ...] = ("gaussian", "uniform")
    true_order: int | None = None
    fitted_order: int | None = None
    cutoff: float = REFERENCE_CUTOFF
    max_lag: int | None = None
    replicates: int = 500
    full: bool = False

    def resolved(self) -> "ExperimentConfig":
        """Apply defaults and validate; raises ValueError on bad settings."""
        if self.experiment not in TABLE_EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; expected one of {TABLE_EXPERIMENTS}"
            )
        n_sims = self.n_sims if self.n_sims is not None else (2000 if self.full else 300)
        if n_sims < 1:
            raise ValueError("n_sims must be at least 1")
        if self.n_samples < 8:
            raise ValueError("n_samples is too small to test anything")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        unknown = set(self.tests) - set(ALL_TESTS)
        if unknown:
            raise ValueError(f"unknown tests {sorted(unknown)}; expected subset of {ALL_TESTS}")
        if not self.tests:
            raise ValueError("select at least one test")
        unknown_dist = set(self.distributions) - {"gaussian", "uniform"}
        if unknown_dist:
            raise ValueError(f"unknown distributions {sorted(unknown_dist)}")
        for name in ("true_order", "fitted_order"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.fitted_order is not None and self.fitted_order >= self.n_samples:
            raise ValueError(
                f"fitted order {self.fitted_order} is infeasible for {self.n_samples} samples"
            )
        if not 0.0 < self.cutoff < 0.5:
            raise ValueError(f"cutoff must be in (0, 0.5), got {self.cutoff}")
        return replace(self, n_sims=n_sims)


@dataclass
class CellResult:
    """Rejection counts for one (test, distribution, scenario) cell."""

    test: str
    distribution: str
    scenario: str
    n_sims: int
    rejections: int
    runtime_s: float = 0.0

    @property
    def rate(self) -> float:
        return self.rejections / self.n_sims

    @property
    def standard_error(self) -> float:
        r = self.rate
        return float(np.sqrt(r * (1.0 - r) / self.n_sims))

    def as_dict(self) -> dict:
        return {
            "test": self.test,
            "distribution": self.distribution,
            "scenario": self.scenario,
            "n_sims": self.n_sims,
            "rejections": self.rejections,
            "rate": self.rate,
            "standard_error": self.standard_error,
            "runtime_s": round(self.runtime_s, 3),
        }


@dataclass
class RejectionReport:
    """All cells of one experiment plus the configuration that produced them."""

    experiment: str
    config: dict
    cells: list[CellResult] = field(default_factory=list)

    def cell(self, test: str, scenario: str, distribution: str = "uniform") -> CellResult:
        for c in self.cells:
            if c.test == test and c.scenario == scenario and c.distribution == distribution:
                return c
        raise KeyError(f"no cell ({test}, {distribution}, {scenario})")

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "cells": [c.as_dict() for c in self.cells],
        }


class _CellCounter:
    """Accumulates rejections and per-test runtime inside a simulation loop."""

    def __init__(self, report: RejectionReport, n_sims: int):
        self.report = report
        self.n_sims = n_sims
        self._cells: dict[tuple[str, str, str], CellResult] = {}

    def add(self, test: str, distribution: str, scenario: str, reject: bool, elapsed: float):
        key = (test, distribution, scenario)
        cell = self._cells.get(key)
        if cell is None:
            cell = CellResult(test, distribution, scenario, self.n_sims, 0)
            self._cells[key] = cell
            self.report.cells.append(cell)
        cell.rejections += int(reject)
        cell.runtime_s += elapsed


def _config_dict(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment,
        "n_sims": cfg.n_sims,
        "n_samples": cfg.n_samples,
        "alpha": cfg.alpha,
        "seed": cfg.seed,
        "tests": list(cfg.tests),
        "distributions": list(cfg.distributions),
        "true_order": cfg.true_order,
        "fitted_order": cfg.fitted_order,
        "cutoff": cfg.cutoff,
        "max_lag": cfg.max_lag,
        "replicates": cfg.replicates,
        "full": cfg.full,
    }


def _innovation_spec(distribution: str, dim: int, half_width: float) -> InnovationSpec:
    if distribution == "gaussian":
        return InnovationSpec.gaussian(dim)
    return InnovationSpec.uniform(dim, -half_width, half_width)


def _calibration(cfg: ExperimentConfig, seed_seq: np.random.SeedSequence) -> stats.CalibrationConfig:
    return stats.CalibrationConfig(
        replicates=cfg.replicates, seed=int(seed_seq.generate_state(1)[0])
    )


def _run_test(counter, test, distribution, scenario, data, n, cfg, calib):
    """Evaluate one selected test on prepared (centered) data."""
    start = time.perf_counter()
    if test == "B1_iid":
        b = stats.multivariate_kurtosis(data)
        moments = stats.iid_moments(1, n)
    elif test == "B1_colored":
        b = stats.multivariate_kurtosis(data)
        cov = stats.lag_covariance(data, cfg.max_lag or stats.default_max_lag(n))
        moments = stats.colored_scalar_moments(cov, n)
    elif test == "B2_colored":
        b = stats.multivariate_kurtosis(data)
        cov = stats.lag_covariance(data, cfg.max_lag or stats.default_max_lag(n))
        moments = stats.colored_bivariate_moments(cov, n, calib)
    else:  # pragma: no cover - guarded by config validation
        raise ValueError(test)
    verdict = stats.normality_test(b, moments, cfg.alpha)
    counter.add(test, distribution, scenario, verdict.reject, time.perf_counter() - start)


def run_rejection_experiment(cfg: ExperimentConfig) -> RejectionReport:
    """Run the configured Monte Carlo protocol and aggregate rejection rates."""
    cfg = cfg.resolved()
    report = RejectionReport(cfg.experiment, _config_dict(cfg))
    counter = _CellCounter(report, cfg.n_sims)
    if cfg.experiment in ("table1", "table2"):
        orders = (4, 14) if cfg.experiment == "table1" else (20,)
        if cfg.true_order is not None:
            orders = (cfg.true_order,)
        _scalar_direct(cfg, counter, orders)
    elif cfg.experiment == "table3":
        _scalar_residuals(cfg, counter)
    elif cfg.experiment == "table4":
        _projections(cfg, counter, true_order=cfg.true_order or 5, on_residuals=False)
    else:  # table5
        _projections(
            cfg,
            counter,
            true_order=cfg.true_order or 20,
            on_residuals=True,
            fitted_order=cfg.fitted_order or 10,
        )
    return report


def _scalar_direct(cfg: ExperimentConfig, counter: _CellCounter, orders):
    """Direct tests on scalar AR data and on its pairwise embedding.

    Each simulation draws ``2 n`` scalar samples so the embedded bivariate
    series has ``n`` pairs; the scalar tests run on the first ``n`` samples
    of the same realization, so every test works at the nominal length.
    """
    n = cfg.n_samples
    for p in orders:
        model = design_lowpass_ar(p, cfg.cutoff)
        scenario = f"AR({p})"
        for distribution in cfg.distributions:
            spec = _innovation_spec(distribution, 1, SCALAR_UNIFORM_HALF_WIDTH)
            root = np.random.SeedSequence([cfg.seed, p, _dist_tag(distribution)])
            for child in root.spawn(cfg.n_sims):
                gen_ss, boot_ss = child.spawn(2)
                raw = simulate_var(model, 2 * n, spec, gen_ss)
                scalar = centered(raw[:n])
                calib = _calibration(cfg, boot_ss)
                for test in cfg.tests:
                    if test == "B2_colored":
                        pairs = centered(embed(raw[:, 0], 2))
                        _run_test(counter, test, distribution, scenario, pairs,
                                  pairs.shape[0], cfg, calib)
                    else:
                        _run_test(counter, test, distribution, scenario, scalar,
                                  n, cfg, calib)


def _scalar_residuals(cfg: ExperimentConfig, counter: _CellCounter):
    """Tests on least squares residuals of a scalar AR, known and misfit order.

    The scalar tests use the first ``n`` residuals; the bivariate test uses
    the pairwise embedding of the full residual series.
    """
    n = cfg.n_samples
    p_true = cfg.true_order or 20
    fits = (cfg.fitted_order,) if cfg.fitted_order is not None else (p_true, 9)
    model = design_lowpass_ar(p_true, cfg.cutoff)
    for distribution in cfg.distributions:
        spec = _innovation_spec(distribution, 1, SCALAR_UNIFORM_HALF_WIDTH)
        root = np.random.SeedSequence([cfg.seed, p_true, 3, _dist_tag(distribution)])
        for child in root.spawn(cfg.n_sims):
            gen_ss, boot_ss = child.spawn(2)
            raw = simulate_var(model, 2 * n, spec, gen_ss)
            calib = _calibration(cfg, boot_ss)
            for fit_p in fits:
                fitted = var.fit_ols(raw, fit_p)
                resid = fitted.residuals(raw)
                scenario = f"AR({p_true}) residuals, fit p={fit_p}"
                scalar = centered(resid[:n])
                for test in cfg.tests:
                    if test == "B2_colored":
                        pairs = centered(embed(resid[:, 0], 2))
                        _run_test(counter, test, distribution, scenario, pairs,
                                  pairs.shape[0], cfg, calib)
                    else:
                        _run_test(counter, test, distribution, scenario, scalar,
                                  n, cfg, calib)


def _projections(cfg, counter, true_order: int, on_residuals: bool, fitted_order: int | None = None):
    """Tests on random 1-D and 2-D projections of a 3-D process.

    One seeded model per experiment; each simulation draws a fresh
    realization and fresh projection directions.  For ``on_residuals`` the
    full 3-D series is first whitened by a least squares VAR fit and the
    residual vectors are projected.
    """
    n = cfg.n_samples
    if fitted_order is not None and n <= 3 * fitted_order + 1:
        raise ValueError("n_samples too small for the residual fit")
    root = np.random.SeedSequence([cfg.seed, true_order, 4 if not on_residuals else 5])
    model_ss, sims_ss = root.spawn(2)
    model = random_var_model(3, true_order, model_ss, VAR3_SPECTRAL_RADIUS)
    variants = [("direct", None)]
    if on_residuals:
        variants.append(("residuals", fitted_order))
    for distribution in cfg.distributions:
        spec = _innovation_spec(distribution, 3, VECTOR_UNIFORM_HALF_WIDTH)
        dist_root = np.random.SeedSequence(
            [cfg.seed, true_order, 6, _dist_tag(distribution)]
        )
        for child in dist_root.spawn(cfg.n_sims):
            gen_ss, proj1_ss, proj2_ss, boot_ss = child.spawn(4)
            raw = simulate_var(model, n, spec, gen_ss)
            calib = _calibration(cfg, boot_ss)
            for variant, fit_p in variants:
                if variant == "direct":
                    source = centered(raw)
                    scenario = f"VAR({true_order}) 3-D"
                else:
                    fitted = var.fit_ols(raw, fit_p)
                    source = centered(fitted.residuals(raw))
                    scenario = f"VAR({true_order}) residuals, fit p={fit_p}"
                m = source.shape[0]
                for test in cfg.tests:
                    if test == "B2_colored":
                        y2 = source @ projection_matrix(3, 2, proj2_ss)
                        _run_test(counter, test, distribution, f"{scenario}, 2-D projection",
                                  y2, m, cfg, calib)
                    else:
                        y1 = source @ projection_matrix(3, 1, proj1_ss)
                        _run_test(counter, test, distribution, f"{scenario}, 1-D projection",
                                  y1, m, cfg, calib)


def _dist_tag(distribution: str) -> int:
    return 0 if distribution == "gaussian" else 1


@dataclass
class ChangeDemoResult:
    """Trajectories of the online detectors on the change scenario.

    ``z_scalar``/``cusum`` are per scalar sample; ``z_pairs`` is the
    bivariate detector on the pairwise embedding, mapped back to scalar time
    (each pair verdict covers its two samples).  Entries are NaN until the
    corresponding detector has produced a value.
    """

    params: dict
    change_start: int
    change_end: int
    critical_z: float
    z_scalar: np.ndarray
    z_pairs: np.ndarray
    cusum: np.ndarray
    reject_scalar: np.ndarray
    status_scalar: list[str]
    warmup_end: int

    @property
    def n_samples(self) -> int:
        return self.z_scalar.shape[0]

    def report(self) -> dict:
        return {
            "params": self.params,
            "n_samples": self.n_samples,
            "change_start": self.change_start,
            "change_end": self.change_end,
            "critical_z": self.critical_z,
            "warmup_end": self.warmup_end,
        }

    def rows(self):
        """Yield (t, z_scalar, z_pairs, cusum) tuples, 1-based time."""
        for i in range(self.n_samples):
            yield (i + 1, self.z_scalar[i], self.z_pairs[i], self.cusum[i])


def run_change_demo(
    seed: int = 0,
    length: int = 15000,
    change_start: int = 5000,
    change_end: int = 10000,
    order: int = 5,
    lambda1: float = 0.99,
    lambda2: float = 0.998,
    lambda_cov: float | None = None,
    alpha: float = 0.05,
    delta: float = 1.0,
    cutoff: float = REFERENCE_CUTOFF,
    replicates: int = 500,
    max_lag: int | None = None,
) -> ChangeDemoResult:
    """Run both online detectors on one realization of the change scenario.

    The scalar detector runs on the raw stream (its residuals also feed the
    cumulative likelihood-ratio baseline); the bivariate detector runs on
    the pairwise embedding.
    """
    from scipy import stats as spstats

    scenario = default_change_scenario(length, change_start, change_end, order, cutoff)
    x = generate_change_scenario(scenario, seed)
    boot_seed = int(np.random.SeedSequence([seed, 99]).generate_state(1)[0])

    det1 = OnlineChangeDetector(
        dim=1, order=order, lambda1=lambda1, lambda2=lambda2, lambda_cov=lambda_cov,
        alpha=alpha, delta=delta, max_lag=max_lag, with_cusum=True,
    )
    scalar_results = det1.process(x)

    det2 = OnlineChangeDetector(
        dim=2, order=order, lambda1=lambda1, lambda2=lambda2, lambda_cov=lambda_cov,
        alpha=alpha, delta=delta, max_lag=max_lag, with_cusum=False,
        calibration=stats.CalibrationConfig(replicates=replicates, seed=boot_seed),
    )
    pair_results = det2.process(embed(x[:, 0], 2))

    n = length
    z1 = np.full(n, np.nan)
    cusum = np.full(n, np.nan)
    reject1 = np.zeros(n, dtype=bool)
    status1 = []
    for i, res in enumerate(scalar_results):
        z1[i] = np.nan if res.z is None else res.z
        cusum[i] = np.nan if res.cusum is None else res.cusum
        reject1[i] = res.reject
        status1.append(res.status)
    z2 = np.full(n, np.nan)
    for j, res in enumerate(pair_results):
        value = np.nan if res.z is None else res.z
        z2[2 * j] = value
        if 2 * j + 1 < n:
            z2[2 * j + 1] = value

    params = {
        "seed": seed, "length": length, "order": order, "lambda1": lambda1,
        "lambda2": lambda2, "lambda_cov": lambda_cov, "alpha": alpha, "delta": delta,
        "cutoff": cutoff, "replicates": replicates,
    }
    return ChangeDemoResult(
        params=params,
        change_start=change_start,
        change_end=change_end,
        critical_z=float(spstats.norm.ppf(1.0 - alpha / 2.0)),
        z_scalar=z1,
        z_pairs=z2,
        cusum=cusum,
        reject_scalar=reject1,
        status_scalar=status1,
        warmup_end=det1.warmup_end,
    )


def test_csv(
    path,
    dim: int | None = None,
    tests: tuple[str, ...] | None = None,
    alpha: float = 0.05,
    max_lag: int | None = None,
    calibration: stats.CalibrationConfig | None = None,
) -> dict:
    """Run the selected tests on a CSV series and return a JSON-safe report.

    With no explicit selection, scalar files get the colored scalar test and
    two-column files the colored bivariate test.
    """
    x = load_series(path, dim)
    n, d = x.shape
    if tests is None:
        if d == 1:
            tests = ("B1_colored",)
        elif d == 2:
            tests = ("B2_colored",)
        else:
            raise ValueError(
                f"no default test for dim={d}; project onto 1 or 2 dimensions first"
            )
    unknown = set(tests) - set(ALL_TESTS)
    if unknown:
        raise ValueError(f"unknown tests {sorted(unknown)}")
    for test in tests:
        need = 2 if test == "B2_colored" else 1
        if d != need:
            raise ValueError(f"test {test} needs dim={need} data, file has dim={d}")
    x = centered(x)
    out: dict = {"path": str(path), "n_samples": n, "dim": d, "alpha": alpha, "tests": {}}
    for test in tests:
        mode = "iid" if test == "B1_iid" else "colored"
        b, moments, verdict = stats.test_series(
            x, alpha=alpha, moments=mode, max_lag=max_lag, calibration=calibration,
            center=False,
        )
        out["tests"][test] = {
            "statistic": b,
            "z": verdict.z,
            "p_value": verdict.p_value,
            "reject": verdict.reject,
            "moments": {
                "mean": moments.mean,
                "variance": moments.variance,
                "source": moments.source,
            },
        }
    return out
