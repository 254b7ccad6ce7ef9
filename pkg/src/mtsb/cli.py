"""Command-line entry point: ``mtsb <subcommand> ...``.

Exit codes: 0 on success, 1 for data/computation errors (message tagged with
the failing stage), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import io as mio
from .bicluster import KMeansConfig, bicluster_pipeline, misclustering_rate, run_stage
from .core import FactorNumbers, LoadingSet
from .evaluate import METHODS, rolling_validation, run_replications
from .estimate import estimate_cluster_loadings, estimate_factor_numbers, estimate_global_loadings
from .exceptions import MtsbError, StageError
from .simulate import PRESETS, generate

log = logging.getLogger("mtsb")


def _factor_tuple(text):
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k0,k,r0,r integers, got {text!r}")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("expected exactly four integers k0,k,r0,r")
    return vals


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _shared(p, series=True):
    if series:
        p.add_argument("series", help="long-format t,row,col,value CSV (optionally .gz)")
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--threads", type=int, help="cap on BLAS threads and parallel jobs (env MTSB_THREADS)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="outdir", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _analysis(p):
    p.add_argument("--l0", type=int, help="number of lags (default 5)")
    p.add_argument("--J0-row", dest="J0_row", type=int)
    p.add_argument("--J0-col", dest="J0_col", type=int)
    p.add_argument("--demean", action="store_true", default=None)
    p.add_argument("--standardize", action="store_true", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="mtsb", description="Biclustering for matrix-valued time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic data set")
    _shared(p, series=False)
    p.add_argument("--scenario", default=None, help=f"preset name {sorted(PRESETS)}")
    p.add_argument("--p1", type=int)
    p.add_argument("--q1", type=int)
    p.add_argument("--T", type=int)

    p = sub.add_parser("factors", help="estimate (k0, k, r0, r)")
    _shared(p)
    _analysis(p)

    p = sub.add_parser("loadings", help="estimate the four loading matrices")
    _shared(p)
    _analysis(p)
    p.add_argument("--factor-numbers", type=_factor_tuple, help="k0,k,r0,r (estimated if omitted)")

    p = sub.add_parser("bicluster", help="run the full biclustering chain")
    _shared(p)
    _analysis(p)
    p.add_argument("--factor-numbers", type=_factor_tuple, help="k0,k,r0,r (estimated if omitted)")
    p.add_argument("--n-row-clusters", type=int)
    p.add_argument("--n-col-clusters", type=int)
    p.add_argument("--truth", help="directory with row_membership.csv/col_membership.csv to score against")

    p = sub.add_parser("replicate", help="Monte Carlo replications")
    _shared(p, series=False)
    p.add_argument("--scenario", default=None)
    p.add_argument("--p1", type=int)
    p.add_argument("--q1", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--l0", dest="l0_set", type=_int_list, default=(1,), help="comma-separated lags, e.g. 1,2,3")
    p.add_argument("--estimated", action="store_true", help="feed estimated factor numbers downstream")

    p = sub.add_parser("rolling", help="rolling reconstruction MSE")
    _shared(p)
    _analysis(p)
    for name in ("k0", "k", "r0", "r"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--start", type=int, required=True, help="first 1-based evaluation time")
    p.add_argument("--method", choices=METHODS, default="ours")
    return parser


def _resolve_threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MTSB_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise MtsbError(f"MTSB_THREADS must be an integer, got {env!r}")
    return None


def _run_config(args, file_cfg):
    merged = dict(file_cfg)
    for key in ("l0", "J0_row", "J0_col", "demean", "standardize", "seed", "outdir"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return mio.RunConfig.from_mapping(merged)


def _load(args, cfg):
    series = run_stage("ingest", mio.load_tensor_csv, args.series)
    if cfg.demean or cfg.standardize:
        series = run_stage("preprocess", mio.preprocess, series, cfg.demean, cfg.standardize)
    return series


def _outdir(cfg):
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _labels(series):
    rows = series.row_labels or [str(i + 1) for i in range(series.p)]
    cols = series.col_labels or [str(j + 1) for j in range(series.q)]
    return rows, cols


def _write_ratios(path, fn):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["direction", "j", "eigenvalue", "ratio", "local_max", "chosen"])
        for direction, diag in (("row", fn.row_diagnostics), ("column", fn.col_diagnostics)):
            if diag is None:
                continue
            for j, lam in enumerate(diag.eigenvalues, start=1):
                ratio = repr(float(diag.ratios[j - 1])) if j <= len(diag.ratios) else ""
                w.writerow(
                    [direction, j, repr(float(lam)), ratio, int(j in diag.local_max_indices), int(j in diag.chosen)]
                )


def _write_factor_numbers(path, fn):
    Path(path).write_text(json.dumps(dict(zip(("k0", "k", "r0", "r"), fn.as_tuple()))) + "\n")


def _scenario(args, file_cfg):
    cfg = dict(file_cfg)
    for key in ("scenario", "p1", "q1", "T", "seed"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    # default to the small Scenario I layout
    if "scenario" not in cfg and "row_blocks" not in cfg:
        cfg["scenario"] = "I"
    if "scenario" in cfg:
        cfg.setdefault("p1", 10)
        cfg.setdefault("q1", 10)
    return mio.scenario_from_config(cfg)


def cmd_simulate(args, file_cfg):
    spec = _scenario(args, file_cfg)
    series, truth = run_stage("simulate", generate, spec)
    out = Path(args.outdir or file_cfg.get("outdir", "."))
    (out / "truth").mkdir(parents=True, exist_ok=True)
    mio.save_tensor_csv(series, out / "series.csv")
    t = out / "truth"
    for name in ("R", "C", "Gamma", "Lambda"):
        mio.write_matrix_csv(t / f"{name}.csv", getattr(truth, name))
    rows = [f"r{i + 1}" for i in range(spec.p)]
    cols = [f"c{j + 1}" for j in range(spec.q)]
    mio.write_membership_csv(t / "row_membership.csv", rows, truth.row_truth)
    mio.write_membership_csv(t / "col_membership.csv", cols, truth.col_truth)
    (t / "scenario.json").write_text(json.dumps(asdict(spec), indent=2) + "\n")
    _write_factor_numbers(t / "factor_numbers.json", FactorNumbers(*spec.factor_numbers()))
    print(f"wrote {out / 'series.csv'} (T={spec.T}, p={spec.p}, q={spec.q})")
    return 0


def cmd_factors(args, file_cfg):
    cfg = _run_config(args, file_cfg)
    series = _load(args, cfg)
    fn = run_stage("factor_numbers", estimate_factor_numbers, series, cfg.l0, cfg.J0_row, cfg.J0_col)
    out = _outdir(cfg)
    _write_ratios(out / "ratios.csv", fn)
    _write_factor_numbers(out / "factor_numbers.json", fn)
    print(*fn.as_tuple())
    return 0


def _pipeline(args, cfg, series):
    kcfg = KMeansConfig(
        restarts=cfg.kmeans_restarts, max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol, seed=cfg.seed
    )
    return bicluster_pipeline(
        series,
        l0=cfg.l0,
        factor_numbers=getattr(args, "factor_numbers", None),
        kmeans_cfg=kcfg,
        J0_row=cfg.J0_row,
        J0_col=cfg.J0_col,
        n_row_clusters=getattr(args, "n_row_clusters", None),
        n_col_clusters=getattr(args, "n_col_clusters", None),
    )


def _write_loadings(out, loadings, rows, cols):
    mio.write_matrix_csv(out / "R.csv", loadings.R, row_names=rows)
    mio.write_matrix_csv(out / "C.csv", loadings.C, row_names=cols)
    mio.write_matrix_csv(out / "Gamma.csv", loadings.Gamma, row_names=rows)
    mio.write_matrix_csv(out / "Lambda.csv", loadings.Lambda, row_names=cols)


def cmd_loadings(args, file_cfg):
    cfg = _run_config(args, file_cfg)
    series = _load(args, cfg)
    fn = args.factor_numbers
    if fn is None:
        fn = run_stage("factor_numbers", estimate_factor_numbers, series, cfg.l0, cfg.J0_row, cfg.J0_col)
    else:
        fn = FactorNumbers(*fn)
    run_stage("factor_numbers", fn.check_dims, series.p, series.q)
    R, C = run_stage("global_loadings", estimate_global_loadings, series, fn.k0, fn.r0, cfg.l0)
    G, L = run_stage("cluster_loadings", estimate_cluster_loadings, series, R, C, fn.k, fn.r, cfg.l0)
    out = _outdir(cfg)
    rows, cols = _labels(series)
    _write_loadings(out, LoadingSet(R, C, G, L), rows, cols)
    _write_factor_numbers(out / "factor_numbers.json", fn)
    print(*fn.as_tuple())
    return 0


def cmd_bicluster(args, file_cfg):
    cfg = _run_config(args, file_cfg)
    series = _load(args, cfg)
    result, loadings, fn = _pipeline(args, cfg, series)
    out = _outdir(cfg)
    rows, cols = _labels(series)
    mio.write_membership_csv(out / "row_membership.csv", rows, result.row_membership)
    mio.write_membership_csv(out / "col_membership.csv", cols, result.col_membership)
    mio.write_matrix_csv(out / "similarity_rows.csv", result.D, rows, rows)
    mio.write_matrix_csv(out / "similarity_cols.csv", result.K, cols, cols)
    mio.write_vector_csv(out / "row_gram_eigenvalues.csv", "eigenvalue", result.row_gram_eigenvalues)
    mio.write_vector_csv(out / "col_gram_eigenvalues.csv", "eigenvalue", result.col_gram_eigenvalues)
    _write_loadings(out, loadings, rows, cols)
    _write_factor_numbers(out / "factor_numbers.json", fn)
    if fn.row_diagnostics is not None:
        _write_ratios(out / "ratios.csv", fn)
    print(f"factor numbers (k0,k,r0,r): {' '.join(map(str, fn.as_tuple()))}")
    print(f"m_hat={result.m_hat} n_hat={result.n_hat}")
    if args.truth:
        truth = Path(args.truth)
        _, row_truth = run_stage("truth", mio.read_membership_csv, truth / "row_membership.csv")
        _, col_truth = run_stage("truth", mio.read_membership_csv, truth / "col_membership.csv")
        rm = run_stage("score", misclustering_rate, result.row_membership, row_truth)
        cm = run_stage("score", misclustering_rate, result.col_membership, col_truth)
        print(f"row misclustering={rm:.6g} column misclustering={cm:.6g}")
    return 0


def cmd_replicate(args, file_cfg, n_jobs):
    spec = _scenario(args, file_cfg)
    report = run_replications(
        spec,
        args.reps,
        l0_set=args.l0_set,
        known_factor_numbers=not args.estimated,
        n_jobs=n_jobs,
    )
    out = Path(args.outdir or file_cfg.get("outdir", "."))
    report.write(out)
    for row in report.rows:
        print(json.dumps(row))
    return 0


def cmd_rolling(args, file_cfg, n_jobs):
    cfg = _run_config(args, file_cfg)
    series = _load(args, cfg)
    fn = (args.k0, args.k, args.r0, args.r)
    rep = run_stage(
        "rolling", rolling_validation, series, args.method, fn, args.start, cfg.l0, n_jobs=n_jobs
    )
    out = _outdir(cfg)
    doc = rep.to_dict()
    (out / "rolling.json").write_text(json.dumps(doc, indent=2) + "\n")
    with open(out / "rolling.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for key in ("method", "mse", "n_evaluated", "mse_full_normalizer", "start_index"):
            w.writerow([key, doc[key]])
        w.writerow(["factor_numbers", ",".join(map(str, fn))])
    print(repr(rep.mse))
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        file_cfg = mio.read_config(args.config) if args.config else {}
        threads = _resolve_threads(args)
        n_jobs = threads or 1
        with threadpool_limits(limits=threads):
            if args.command == "simulate":
                return cmd_simulate(args, file_cfg)
            if args.command == "factors":
                return cmd_factors(args, file_cfg)
            if args.command == "loadings":
                return cmd_loadings(args, file_cfg)
            if args.command == "bicluster":
                return cmd_bicluster(args, file_cfg)
            if args.command == "replicate":
                return cmd_replicate(args, file_cfg, n_jobs)
            if args.command == "rolling":
                return cmd_rolling(args, file_cfg, n_jobs)
    except StageError as exc:
        print(f"mtsb {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (MtsbError, OSError, ValueError) as exc:
        print(f"mtsb {args.command}: error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    parser.print_usage(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
