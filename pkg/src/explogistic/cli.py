"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from . import data as data_mod
from .data import read_weighted_csv, simulate_biased, write_weighted_csv
from .diagnostics import (
    CurveRow, HistogramRow, default_grid, ppc_curves, weighted_histogram, write_rows_csv,
)
from .distributions import DEFAULT_TOL
from .errors import ConvergenceError, DataError, DomainError, QuadratureError, SamplingError
from .imputation import (
    impute_average, impute_multiple, manifest_lines, write_completed_csv,
)
from .inference import (
    ConvergenceWarning, McmcConfig, PriorSpec, mcmc_fit, read_draws_csv,
    summarize, write_draws_csv, write_summary_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_SEED = 23

PRIOR_PRESETS = {
    "listing6": PriorSpec.default,
    "default": PriorSpec.default,
    "eq4": PriorSpec.vague,
    "vague": PriorSpec.vague,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="observations CSV (header row required)")
    p.add_argument("--value-col", default="value")
    p.add_argument("--weight-col", default=None,
                   help="survey weight column; defaults to 'weight' when that column exists")


def _load_data(args):
    weight_col = args.weight_col
    if weight_col is None:
        try:
            with open(args.data, newline="", encoding="utf-8") as fh:
                header = next(csv.reader(fh), [])
        except OSError as exc:
            raise DataError(f"cannot open {args.data}: {exc}") from None
        weight_col = "weight" if "weight" in header else None
    return read_weighted_csv(args.data, args.value_col, weight_col)


def cmd_simulate(args):
    if args.n_obs > args.n_pool:
        raise UsageError(f"--n-obs ({args.n_obs}) exceeds --n-pool ({args.n_pool})")
    rng = np.random.default_rng(args.seed)
    sample = simulate_biased(args.n_pool, args.lam, args.mu, args.sigma, args.n_obs, rng)
    write_weighted_csv(args.out, sample)
    print(f"wrote {len(sample)} records to {args.out}")


def cmd_fit(args):
    if args.chains < 2:
        raise UsageError("--chains must be at least 2 for R-hat")
    sample = _load_data(args)
    cfg = McmcConfig(n_chains=args.chains, n_warmup=args.warmup, n_draws=args.draws,
                     seed=args.seed, tol=args.tol)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        post = mcmc_fit(sample, PRIOR_PRESETS[args.prior_preset](), cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    rows = summarize(post)
    write_draws_csv(args.out_draws, post)
    write_summary_csv(args.out_summary, rows)
    print(f"{'parameter':<11} {'median':>10} {'2.5%':>10} {'97.5%':>10} {'rhat':>7} {'ess':>7}")
    for r in rows:
        print(f"{r.parameter:<11} {r.median:>10.4g} {r.q025:>10.4g} {r.q975:>10.4g} "
              f"{r.rhat:>7.3f} {r.ess:>7.0f}")


def cmd_impute(args):
    sample = _load_data(args)
    post = read_draws_csv(args.draws)
    rng = np.random.default_rng(args.seed)
    prefix = args.out_prefix
    if args.mode == "average":
        datasets = [impute_average(sample, post, rng, args.tol)]
        files = [f"{prefix}_average.csv"]
    else:
        if args.m > len(post):
            raise UsageError(f"--m {args.m} exceeds the {len(post)} stored draws")
        datasets = impute_multiple(sample, post, args.m, rng, args.tol)
        files = [f"{prefix}_{i + 1}.csv" for i in range(len(datasets))]
    Path(files[0]).parent.mkdir(parents=True, exist_ok=True)
    for ds, f in zip(datasets, files):
        write_completed_csv(f, ds)
    manifest = f"{prefix}_manifest.txt"
    Path(manifest).write_text("\n".join(manifest_lines(datasets, files)) + "\n", encoding="utf-8")
    for ds, f in zip(datasets, files):
        print(f"{f}: k={ds.k_used:.4f} n_new={ds.n_new}")


def cmd_ppc(args):
    post = read_draws_csv(args.draws)
    if args.curves > len(post):
        raise UsageError(f"--curves {args.curves} exceeds the {len(post)} stored draws")
    grid = default_grid(post, args.grid_points)
    sample = _load_data(args) if args.data else None
    if sample is not None and args.x_max is None:
        grid = np.linspace(0.0, max(grid[-1], float(sample.values.max())), args.grid_points)
    if args.x_max is not None:
        grid = np.linspace(0.0, args.x_max, args.grid_points)
    write_rows_csv(args.out, ppc_curves(post, args.curves, grid, args.tol), CurveRow)
    print(f"wrote {args.curves} curves x {grid.size} points to {args.out}")
    if sample is not None:
        out_hist = args.out_hist or str(Path(args.out).with_suffix("")) + "_hist.csv"
        width = args.bin_width or grid[-1] / 40
        write_rows_csv(out_hist, weighted_histogram(sample, width), HistogramRow)
        print(f"wrote weighted histogram to {out_hist}")


def cmd_ciss_filter(args):
    gv = data_mod.read_table(args.gv)
    occ = data_mod.read_table(args.occ)
    sample, report = data_mod.ciss_filter(gv, occ, strict_case=args.strict_case)
    write_weighted_csv(args.out, sample)
    for line in report.lines():
        print(line, file=sys.stderr)
    print(f"wrote {len(sample)} vehicles (total weight {sample.n_effective:.6g}) to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="explogistic",
                     description="Selection-model correction and imputation of MNAR data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="biased sample from an exponential population")
    p.add_argument("--n-pool", type=_nonneg_int, default=2500)
    p.add_argument("--lambda", dest="lam", type=_positive(float), default=0.5)
    p.add_argument("--mu", type=float, default=2.0)
    p.add_argument("--sigma", type=_positive(float), default=0.5)
    p.add_argument("--n-obs", type=_nonneg_int, default=250)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="MCMC fit of the exponential-logistic model")
    _add_data_args(p)
    p.add_argument("--prior-preset", choices=sorted(PRIOR_PRESETS), default="listing6",
                   help="listing6/default: N(0,5), N(0,5), N(0,1); eq4/vague: N(0,10) x 3")
    p.add_argument("--chains", type=_positive(int), default=4)
    p.add_argument("--warmup", type=_nonneg_int, default=1000)
    p.add_argument("--draws", type=_positive(int), default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL)
    p.add_argument("--out-draws", default="draws.csv")
    p.add_argument("--out-summary", default="summary.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("impute", help="complete the data from posterior draws")
    _add_data_args(p)
    p.add_argument("--draws", required=True, help="draws CSV written by 'fit'")
    p.add_argument("--mode", choices=("multiple", "average"), default="multiple")
    p.add_argument("--m", type=_positive(int), default=5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("ppc", help="posterior predictive curves as a table")
    p.add_argument("--draws", required=True)
    _add_data_args(p, required=False)
    p.add_argument("--curves", type=_positive(int), default=20)
    p.add_argument("--grid-points", type=_positive(int), default=512)
    p.add_argument("--x-max", type=_positive(float), default=None)
    p.add_argument("--bin-width", type=_positive(float), default=None)
    p.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL)
    p.add_argument("--out", required=True)
    p.add_argument("--out-hist", default=None)
    p.set_defaults(func=cmd_ppc)

    p = sub.add_parser("ciss-filter", help="select PDO rear-end passenger vehicles")
    p.add_argument("--gv", required=True, help="GV (vehicle) table as CSV")
    p.add_argument("--occ", required=True, help="OCC (occupant) table as CSV")
    p.add_argument("--strict-case", action="store_true",
                   help="drop a vehicle if any occupant in the whole case is injured")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ciss_filter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"explogistic {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        print(f"explogistic {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QuadratureError, SamplingError, ConvergenceError) as exc:
        print(f"explogistic {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
