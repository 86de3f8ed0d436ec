"""Command line interface.

Subcommands: ``simulate`` (write benchmark data as CSV), ``test`` (run the
normality tests on a CSV series), ``bench table1..table5`` (Monte Carlo
rejection-rate experiments), ``detect`` (change-detection demo trajectory).

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import experiments, simulate
from .exceptions import DataError
from .simulate import REFERENCE_CUTOFF, InnovationSpec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serialnorm",
        description="Kurtosis-based normality testing for serially dependent data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate benchmark series as CSV")
    sim.add_argument("--kind", choices=("ar", "var3", "change"), default="ar")
    sim.add_argument("--N", type=int, default=1000, help="number of samples")
    sim.add_argument("--p", type=int, default=4, help="model order")
    sim.add_argument("--cutoff", type=float, default=REFERENCE_CUTOFF)
    sim.add_argument("--innovations", choices=("gaussian", "uniform"), default="gaussian")
    sim.add_argument("--bound", type=float, default=math.sqrt(3.0),
                     help="half width of uniform innovations")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="-", help="output CSV path (default stdout)")
    sim.set_defaults(func=_cmd_simulate)

    test = sub.add_parser("test", help="test a CSV series for normality")
    test.add_argument("path")
    test.add_argument("--d", type=int, default=None, help="declared dimension")
    test.add_argument("--tests", default=None,
                      help="comma separated subset of B1_iid,B1_colored,B2_colored")
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--tau-max", type=int, default=None, dest="tau_max")
    test.add_argument("--out", default="-", help="output JSON path (default stdout)")
    test.set_defaults(func=_cmd_test)

    bench = sub.add_parser("bench", help="run a rejection-rate experiment")
    bench.add_argument("experiment", choices=experiments.TABLE_EXPERIMENTS)
    bench.add_argument("--M", type=int, default=None, help="number of simulations")
    bench.add_argument("--N", type=int, default=1000)
    bench.add_argument("--alpha", type=float, default=0.05)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--p", type=int, default=None, help="generator order override")
    bench.add_argument("--p-hat", type=int, default=None, dest="p_hat",
                       help="fitted order override for residual protocols")
    bench.add_argument("--tests", default=None)
    bench.add_argument("--tau-max", type=int, default=None, dest="tau_max")
    bench.add_argument("--full", action="store_true", help="use 2000 simulations")
    bench.add_argument("--out", default="-", help="output JSON path (default stdout)")
    bench.set_defaults(func=_cmd_bench)

    detect = sub.add_parser("detect", help="run the change-detection demo")
    detect.add_argument("--N", type=int, default=15000)
    detect.add_argument("--change-start", type=int, default=5000)
    detect.add_argument("--change-end", type=int, default=10000)
    detect.add_argument("--p", type=int, default=5)
    detect.add_argument("--lambda1", type=float, default=0.99)
    detect.add_argument("--lambda2", type=float, default=0.998)
    detect.add_argument("--alpha", type=float, default=0.05)
    detect.add_argument("--seed", type=int, default=0)
    detect.add_argument("--tau-max", type=int, default=None, dest="tau_max")
    detect.add_argument("--out", default="change_demo.csv",
                        help="trajectory CSV path (a JSON report is written alongside)")
    detect.set_defaults(func=_cmd_detect)
    return parser


def _write_text(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_simulate(args) -> int:
    if args.innovations == "uniform":
        spec = InnovationSpec.uniform(1, -args.bound, args.bound)
    else:
        spec = InnovationSpec.gaussian(1)
    if args.kind == "ar":
        model = simulate.design_lowpass_ar(args.p, args.cutoff)
        data = simulate.simulate_var(model, args.N, spec, args.seed)
    elif args.kind == "var3":
        model = simulate.random_var_model(
            3, args.p, args.seed, experiments.VAR3_SPECTRAL_RADIUS
        )
        spec3 = (
            InnovationSpec.uniform(3, -args.bound, args.bound)
            if args.innovations == "uniform"
            else InnovationSpec.gaussian(3)
        )
        data = simulate.simulate_var(model, args.N, spec3, args.seed)
    else:
        scenario = simulate.default_change_scenario(
            length=args.N,
            change_start=args.N // 3,
            change_end=2 * args.N // 3,
            order=args.p,
            cutoff=args.cutoff,
        )
        data = simulate.generate_change_scenario(scenario, args.seed)
    if args.out == "-":
        writer = csv.writer(sys.stdout)
        writer.writerow([f"x{i + 1}" for i in range(data.shape[1])])
        for row in data:
            writer.writerow([f"{v:.17g}" for v in row])
    else:
        simulate.save_series(args.out, data)
    return 0


def _parse_tests(text):
    if text is None:
        return None
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _cmd_test(args) -> int:
    report = experiments.test_csv(
        args.path,
        dim=args.d,
        tests=_parse_tests(args.tests),
        alpha=args.alpha,
        max_lag=args.tau_max,
    )
    _write_text(args.out, json.dumps(report, indent=2) + "\n")
    return 0


def _cmd_bench(args) -> int:
    cfg = experiments.ExperimentConfig(
        experiment=args.experiment,
        n_sims=args.M,
        n_samples=args.N,
        alpha=args.alpha,
        seed=args.seed,
        tests=_parse_tests(args.tests) or experiments.ALL_TESTS,
        true_order=args.p,
        fitted_order=args.p_hat,
        max_lag=args.tau_max,
        full=args.full,
    )
    report = experiments.run_rejection_experiment(cfg)
    _write_text(args.out, json.dumps(report.as_dict(), indent=2) + "\n")
    return 0


def _cmd_detect(args) -> int:
    result = experiments.run_change_demo(
        seed=args.seed,
        length=args.N,
        change_start=args.change_start,
        change_end=args.change_end,
        order=args.p,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        alpha=args.alpha,
        max_lag=args.tau_max,
    )
    out = args.out
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "z_B1", "z_B2", "s_cusum"])
        for t, z1, z2, s in result.rows():
            writer.writerow(
                [t]
                + ["" if not np.isfinite(v) else f"{v:.10g}" for v in (z1, z2, s)]
            )
    report = result.report()
    report["trajectory_csv"] = out
    json_path = out[:-4] + ".json" if out.endswith(".csv") else out + ".json"
    _write_text(json_path, json.dumps(report, indent=2) + "\n")
    sys.stderr.write(f"trajectory written to {out}, report to {json_path}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
