"""Command-line interface.

Subcommands: ``simulate``, ``test``, ``experiment``, ``fs-table``,
``calibrate``.  Exit codes: 0 success, 1 usage or configuration error,
2 degenerate statistic, 3 internal numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .config import ConfigError, load_dataset_config, load_experiment_spec
from .coxhr import cox_hazard_ratio_test
from .datasets import load_dataset, save_dataset
from .errors import (
    ConvergenceError,
    DegenerateVarianceError,
    IllConditionedError,
    InputError,
    LocalCovError,
)
from .lcm import FoldPartition, estimate_lcm_crossfit
from .lct import endpoint_test_from_path, sup_test_from_path
from .learners import LearnerConfig
from .sim import sample_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2
EXIT_NUMERICAL = 3


class _ZeroResidual:
    """Stub predictor used to exercise the degenerate-variance path."""

    kind = "stub_zero"

    def residual(self, x, z, record, idx=None):
        idx = np.arange(x.n) if idx is None else np.asarray(idx)
        return np.zeros((idx.size, x.grid.q))


class _ZeroIntensity:
    kind = "stub_zero"

    def intensity(self, z, record, idx=None):
        idx = np.arange(z.n) if idx is None else np.asarray(idx)
        return np.zeros((idx.size, z.grid.q))


def _cmd_simulate(args) -> int:
    cfg = load_dataset_config(args.config)
    if args.grid_q:
        cfg = replace(cfg, q=args.grid_q)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    ds = sample_dataset(cfg)
    save_dataset(ds, args.out_dir)
    print(json.dumps({"written": args.out_dir, "n": ds.n, "q": ds.grid.q,
                      "events": int((ds.record.event_index >= 0).sum()),
                      "beta1": ds.config.beta1}))
    return EXIT_OK


def _cmd_test(args) -> int:
    ds = load_dataset(args.dataset_dir)
    seed = args.seed if args.seed is not None else 0
    if args.method == "cox_hr":
        report = cox_hazard_ratio_test(ds.x, ds.z, ds.record, alpha=args.alpha,
                                       seed=seed)
        print(report.to_json())
        return EXIT_OK
    partition = FoldPartition(ds.n, args.k, seed=seed + 1)
    fold_nuisances = None
    if args.stub_zero_residual:
        fold_nuisances = lambda x, z, record, split, k: (_ZeroResidual(), _ZeroIntensity())
    path = estimate_lcm_crossfit(ds.x, ds.z, ds.record, partition,
                                 LearnerConfig(), fold_nuisances=fold_nuisances)
    if args.emit_path:
        path.to_csv(args.emit_path)
    if args.method == "xlct_sup":
        report = sup_test_from_path(path, args.alpha, seed=seed)
    else:
        report = endpoint_test_from_path(path, args.alpha, seed=seed)
    print(report.to_json())
    return EXIT_OK


def _cmd_experiment(args) -> int:
    spec = load_experiment_spec(args.spec)
    progress = None
    if args.verbose:
        progress = lambda done, total: print(f"replication {done}/{total}",
                                             file=sys.stderr)
    rows = harness.run_experiment(spec, workers=args.threads, progress=progress)
    harness.write_result_table(rows, args.out_csv)
    summary = harness.summarize_results(rows)
    summary_path = args.summary or (args.out_csv.rsplit(".", 1)[0] + "_summary.csv")
    harness.write_summary(summary, summary_path)
    print(json.dumps({"results": args.out_csv, "summary": summary_path,
                      "rows": len(rows)}))
    return EXIT_OK


def _cmd_fs_table(args) -> int:
    rows = harness.fs_comparison_table(n_walks=args.mc_walks, n_steps=args.mc_steps,
                                       seed=args.seed or 0)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("x", "fs_series", "fs_mc", "abs_diff"))
        writer.writeheader()
        writer.writerows(rows)
    ecdf_path = args.ecdf_out or (args.out.rsplit(".", 1)[0] + "_ecdf.csv")
    ecdfs = harness.fs_discretization_ecdfs(seed=args.seed or 0)
    with open(ecdf_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q", "p_value", "ecdf"])
        for q, ps in ecdfs.items():
            m = ps.size
            for i, p in enumerate(ps):
                writer.writerow([q, f"{p:.10g}", f"{(i + 1) / m:.10g}"])
    print(json.dumps({"table": args.out, "ecdf": ecdf_path}))
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    checks = harness.oracle_calibration_suite(seed=args.seed or 0, n=args.n,
                                              reps=args.reps)
    for check in checks:
        print(json.dumps(check))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="localcov",
        description="Conditional local independence testing for counting processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="sample a dataset from a config file")
    p_sim.add_argument("config")
    p_sim.add_argument("out_dir")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--grid-q", type=int, default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_test = sub.add_parser("test", help="run a test on a dataset directory")
    p_test.add_argument("dataset_dir")
    p_test.add_argument("--method", default="xlct_sup",
                        choices=("xlct_sup", "xlct_endpoint", "cox_hr"))
    p_test.add_argument("--k", type=int, default=5)
    p_test.add_argument("--alpha", type=float, default=0.05)
    p_test.add_argument("--seed", type=int, default=None)
    p_test.add_argument("--emit-path", default=None,
                        help="also write the estimated path as CSV")
    p_test.add_argument("--stub-zero-residual", action="store_true",
                        help="testing hook: force a zero residual predictor")
    p_test.set_defaults(func=_cmd_test)

    p_exp = sub.add_parser("experiment", help="run a level/power sweep")
    p_exp.add_argument("spec")
    p_exp.add_argument("out_csv")
    p_exp.add_argument("--summary", default=None)
    p_exp.add_argument("--threads", type=int, default=1)
    p_exp.add_argument("--verbose", action="store_true")
    p_exp.set_defaults(func=_cmd_experiment)

    p_fs = sub.add_parser("fs-table", help="null-distribution series vs Monte Carlo")
    p_fs.add_argument("--mc-walks", type=int, default=100_000)
    p_fs.add_argument("--mc-steps", type=int, default=8192)
    p_fs.add_argument("--out", default="fs_table.csv")
    p_fs.add_argument("--ecdf-out", default=None)
    p_fs.add_argument("--seed", type=int, default=None)
    p_fs.set_defaults(func=_cmd_fs_table)

    p_cal = sub.add_parser("calibrate", help="oracle-nuisance calibration checks")
    p_cal.add_argument("--seed", type=int, default=None)
    p_cal.add_argument("--n", type=int, default=500)
    p_cal.add_argument("--reps", type=int, default=500)
    p_cal.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}),
              file=sys.stderr)
        return EXIT_USAGE
    except DegenerateVarianceError as exc:
        print(json.dumps({"error": str(exc), "kind": "DegenerateVarianceError"}))
        return EXIT_DEGENERATE
    except (ConvergenceError, IllConditionedError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}),
              file=sys.stderr)
        return EXIT_NUMERICAL
    except LocalCovError as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}),
              file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
