"""Command-line interface: ``shrinkmeta analyze | simulate | table``.

Exit codes: 0 success, 2 input or flag error, 3 numerical failure,
4 table finished with failed cells.
"""
import argparse
import csv
import io
import json
import sys

from . import __version__
from .errors import DegeneratePosteriorError, IntervalNotConverged
from .inference import GridConfig, shrinkage_interval, tau_posterior_grid
from .model import DatasetParseError, SeRule, parse_prior, read_dataset_csv
from .simulate import (
    TABLE_PRIOR_SCALES,
    TABLE_ROW_ORDER,
    TABLE_TAUS,
    Scenario,
    TauSpec,
    resolve_workers,
    run_scenario,
    run_table,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4


class UsageError(Exception):
    pass


def _pct(x):
    return round(100.0 * x, 1)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(out, meta, columns, rows, failures=()):
    for key, value in meta.items():
        out.write(f"# {key}={_fmt(value)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([f"{row[c]:.1f}" if c.endswith("_pct") and row[c] is not None
                         else _fmt(row[c]) for c in columns])
    for f in failures:
        out.write(f"# failed cell {f['index']}: n1={f['n1']} n2={f['n2']} "
                  f"prior_scale={f['prior_scale']:g} tau_spec={f['tau_spec']}: {f['error']}\n")


def _write_json(out, meta, rows, failures=None):
    doc = {"meta": meta, "rows": rows}
    if failures is not None:
        doc["failures"] = list(failures)
    json.dump(doc, out, indent=2)
    out.write("\n")


def _emit(args, text):
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer: {text!r}")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _level(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _se_rule(args):
    try:
        return SeRule(args.se_c)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _prior(text):
    try:
        return parse_prior(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _workers(args):
    try:
        return resolve_workers(args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_analyze(args):
    prior = _prior(args.prior)
    try:
        data = read_dataset_csv(args.input)
    except DatasetParseError as exc:
        raise UsageError(str(exc)) from None
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    cfg = GridConfig()
    rows = []
    n_grid = cfg.n_init
    for i, study in enumerate(data.studies):
        summ = shrinkage_interval(data, prior, i, args.level, cfg)
        n_grid = max(n_grid, summ.n_grid)
        rows.append({
            "record": "study", "id": study.id, "estimate": study.estimate,
            "std_err": study.std_err, "shrink_mean": summ.mean, "shrink_sd": summ.sd,
            "shrink_median": summ.median, "lo": summ.interval_lo, "hi": summ.interval_hi,
            "level": summ.level,
        })
    grid = tau_posterior_grid(data, prior, cfg, n_grid)
    rows.append({
        "record": "tau", "id": "tau", "estimate": None, "std_err": None,
        "shrink_mean": grid.mean(), "shrink_sd": None,
        "shrink_median": grid.quantile(0.5), "lo": grid.quantile(0.025),
        "hi": grid.quantile(0.975), "level": 0.95,
    })
    meta = {"command": "analyze", "version": __version__, "input": str(args.input),
            "prior": prior.spec(), "level": args.level, "grid_nodes": n_grid}
    columns = ["record", "id", "estimate", "std_err", "shrink_mean", "shrink_sd",
               "shrink_median", "lo", "hi", "level"]
    buf = io.StringIO()
    if args.format == "json":
        _write_json(buf, meta, rows)
    else:
        _write_csv(buf, meta, columns, rows)
    _emit(args, buf.getvalue())
    return EXIT_OK


def _estimate_row(sc, est):
    row = sc.describe()
    row.update({
        "coverage": est.coverage,
        "coverage_pct": _pct(est.coverage),
        "hits": est.hits,
        "mc_std_err": est.mc_std_err,
        "mc_std_err_pct": _pct(est.mc_std_err),
    })
    return row


def cmd_simulate(args):
    prior = _prior(args.prior)
    try:
        tau = TauSpec.parse(args.tau)
        sc = Scenario(args.n1, args.n2, prior, tau, _se_rule(args), args.level,
                      args.reps, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    est = run_scenario(sc, _workers(args))
    row = _estimate_row(sc, est)
    meta = {"command": "simulate", "version": __version__}
    columns = ["n1", "n2", "prior", "prior_scale", "tau_spec", "se_rule_c", "level", "reps",
               "seed", "hits", "coverage", "coverage_pct", "mc_std_err", "mc_std_err_pct"]
    buf = io.StringIO()
    if args.format == "json":
        _write_json(buf, meta, [row])
    else:
        _write_csv(buf, meta, columns, [row])
    _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_table(args):
    se_rule = _se_rule(args)
    workers = _workers(args)
    cells = run_table(TABLE_PRIOR_SCALES, TABLE_ROW_ORDER, TABLE_TAUS, True, args.reps,
                      args.seed, args.level, se_rule, workers)
    rows, failures = [], []
    for cell in cells:
        sc = cell.scenario
        base = {"cell": cell.index, "n1": sc.n1, "n2": sc.n2, "prior_scale": sc.prior.scale,
                "tau_spec": sc.tau_spec.label()}
        if cell.ok:
            est = cell.estimate
            base.update({"coverage_pct": _pct(est.coverage),
                         "mc_std_err_pct": _pct(est.mc_std_err),
                         "coverage": est.coverage, "hits": est.hits, "reps": est.reps,
                         "cell_seed": sc.master_seed})
            rows.append(base)
        else:
            base.update({"index": cell.index, "error": cell.error})
            failures.append(base)
    meta = {"command": "table", "version": __version__, "seed": args.seed,
            "reps": args.reps, "se_rule_c": se_rule.constant_c, "level": args.level,
            "cells": len(cells), "failed_cells": len(failures)}
    columns = ["n1", "n2", "prior_scale", "tau_spec", "coverage_pct", "mc_std_err_pct",
               "coverage", "hits", "reps", "cell_seed"]
    buf = io.StringIO()
    if args.format == "json":
        _write_json(buf, meta, rows, failures)
    else:
        _write_csv(buf, meta, columns, rows, failures)
    _emit(args, buf.getvalue())
    return EXIT_PARTIAL if failures else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shrinkmeta",
        description="Bayesian shrinkage intervals under the normal-normal hierarchical model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, prior=True):
        if prior:
            p.add_argument("--prior", default="half-normal:0.5",
                           help="heterogeneity prior, half-normal:<scale> (default %(default)s)")
        p.add_argument("--level", type=_level, default=0.95, help="credible level")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", "-o", help="write to this file instead of stdout")

    def sim_flags(p):
        p.add_argument("--reps", type=_positive_int, default=10_000)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--se-c", "--se-rule-c", dest="se_c", type=float,
                       default=SeRule().constant_c,
                       help="standard error = c / sqrt(n) (default %(default)s)")
        p.add_argument("--workers", type=_positive_int, default=None,
                       help="worker threads (env SHRINKMETA_THREADS overrides)")

    p = sub.add_parser("analyze", help="shrinkage intervals for a CSV of studies")
    p.add_argument("input", help="CSV with header id,estimate,std_err")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="coverage of the study-1 interval for one scenario")
    p.add_argument("--n1", type=_positive_int, required=True)
    p.add_argument("--n2", type=_positive_int, required=True)
    p.add_argument("--tau", default="prior", help="fixed:<value> or prior")
    common(p)
    sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table", help="reproduce the full coverage table")
    common(p, prior=False)
    sim_flags(p)
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"shrinkmeta: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntervalNotConverged, DegeneratePosteriorError) as exc:
        print(f"shrinkmeta: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
