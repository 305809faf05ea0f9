"""Command-line interface: ingest, gclust, diagnose, simulate, benchmark, nmf-compare.

Every subcommand validates its inputs before doing work, writes its outputs
under --out-dir, and exits 0 only when all outputs were written. Failures
emit a one-line JSON object on stderr and exit with status 2. All
randomness flows from --seed, so repeating an invocation reproduces its
output files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, evaluation, ingest, model_selection, nmf, spectral
from .util import format_float, save_matrix_csv, write_json


def _fail(message, code=2):
    json.dump({"error": str(message), "code": code}, sys.stderr)
    sys.stderr.write("\n")
    return code


def _parse_index_list(text):
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _load_matrix_arg(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    return ingest.load_data_matrix(path)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    events = Path(args.events)
    if not events.exists():
        raise FileNotFoundError(f"input not found: {events}")
    log = ingest.read_event_file(events, delimiter=args.delimiter,
                                 has_header=args.header, strict=not args.skip_bad_lines,
                                 horizon=args.horizon)
    if args.boundaries:
        part = ingest.TemporalPartition(np.asarray(_parse_index_list_float(args.boundaries)))
    else:
        horizon = args.horizon if args.horizon is not None else log.horizon
        if horizon <= 0:
            raise ValueError("cannot infer a positive horizon from the events")
        # widen so the last event's half-open bin still contains it
        part = ingest.TemporalPartition.uniform(args.bins, np.nextafter(horizon, np.inf))
    gs = ingest.temporal_bin(log, part, n=args.n, symmetrize=args.symmetrize)
    if args.map:
        gs = ingest.contract_vertices(gs, ingest.read_contraction_map(args.map))
    dm = ingest.vectorize(gs)
    out = _out_dir(args)
    ingest.save_data_matrix(dm, out / "X.csv", out / "X.meta.json")
    write_json(out / "ingest.json", {
        "records": len(log), "skipped": log.skipped,
        "n": dm.n, "T": dm.T,
        "boundaries": [float(b) for b in part.boundaries],
    })
    return 0


def _parse_index_list_float(text):
    return [float(x) for x in text.split(",") if x.strip() != ""]


def cmd_gclust(args) -> int:
    dm = _load_matrix_arg(args.x)
    out = _out_dir(args)
    common = dict(solver=args.solver, restarts=args.restarts,
                  nmf_tol=args.tol, nmf_max_iter=args.max_iter,
                  alpha=args.alpha, beta=args.beta)
    if args.r is not None:
        if not 1 <= args.r <= min(dm.X.shape):
            raise ValueError(f"invalid r={args.r} for matrix shape {dm.X.shape}")
        result = model_selection.gclust(dm, args.r, seed=args.seed, **common)
        table = [result.score]
        best = result
        r_hat = args.r
    else:
        res = model_selection.get_gclust_model_dim(
            dm, r_max=args.r_max, r_min=args.r_min, seed=args.seed, **common)
        table, best, r_hat = res.table, res.best, res.r_hat
    model_selection.save_score_table(table, out / "scores.csv")
    model_selection.save_labels(best, out / "labels.json")
    fp = nmf.fixed_point_residuals(best.W, best.H, dm.X)
    nmf.save_factorization(best.factorization, out / "W.csv", out / "H.csv",
                           out / "factorization.json", eps=fp)
    write_json(out / "selection.json", {"r_hat": int(r_hat)})
    return 0


def cmd_diagnose(args) -> int:
    dm = _load_matrix_arg(args.x)
    if dm.n is None:
        raise ValueError("data matrix has no vertex count; cannot form graph slices")
    gs = ingest.devectorize(dm)
    if args.map:
        gs = ingest.contract_vertices(gs, ingest.read_contraction_map(args.map))
    data = ingest.vectorize(gs)
    denoised = spectral.usvt(data.X, c=args.usvt_constant, clip_q=args.clip_percentile)
    mean_dm = ingest.DataMatrix(np.maximum(denoised.estimate, 0.0), n=gs.n)
    if args.mean_floor is not None:
        mean_dm = ingest.DataMatrix(np.maximum(mean_dm.X, args.mean_floor), n=gs.n)
    means = ingest.devectorize(mean_dm)

    indices = _parse_index_list(args.select) if args.select else list(range(gs.n))
    S = diagnostics.selection_matrix(indices, gs.n)
    p = len(indices)
    baseline = diagnostics.gaussian_singular_baseline(
        p, reps=args.baseline_reps, seed=args.baseline_seed,
        cache_dir=args.cache_dir)
    slices = range(gs.T) if args.t is None else [args.t]
    per_slice_sv, mse = {}, {}
    for t in slices:
        if not 0 <= t < gs.T:
            raise ValueError(f"slice index {t} out of range for T={gs.T}")
        delta = diagnostics.residual_matrix(gs.slices[t], means.slices[t], source="usvt")
        sketched = diagnostics.sketch(delta.delta, S)
        per_slice_sv[t] = np.linalg.svd(sketched, compute_uv=False)
        mse[t] = diagnostics.contraction_mse(sketched, baseline)
    out = _out_dir(args)
    diagnostics.save_residual_report(out / "residual_report.csv",
                                     out / "residual_mse.json",
                                     per_slice_sv, baseline, mse)
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.preset == "two-pattern":
        dm, labels = evaluation.two_pattern_matrix(kappa=args.kappa, copies=args.copies)
        ingest.save_data_matrix(dm, out / "X.csv", out / "X.meta.json")
        write_json(out / "truth.json", {"labels": [int(x) for x in labels]})
        return 0
    if args.preset == "swimmer":
        dm = evaluation.generate_swimmer()
        ingest.save_data_matrix(dm, out / "X.csv", out / "X.meta.json")
        return 0
    # block-model draw, optionally from a config file
    if args.config:
        cfg = evaluation.MonteCarloConfig.from_json(args.config)
        m, schedule = cfg.m, cfg.schedule
    else:
        m, schedule = args.m, tuple([1, 2] * (args.T // 2) + [1] * (args.T % 2))
    B1, B2 = evaluation.default_block_patterns()
    spec = evaluation.BlockModelSpec([B1, B2], m=m, schedule=np.asarray(schedule),
                                     rho=args.rho)
    gs = evaluation.simulate_block_poisson(spec, seed=args.seed)
    dm = ingest.vectorize(gs)
    ingest.save_data_matrix(dm, out / "X.csv", out / "X.meta.json")
    write_json(out / "truth.json", {"labels": [int(x) for x in spec.schedule]})
    return 0


def cmd_benchmark(args) -> int:
    cfg = evaluation.MonteCarloConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = evaluation.run_monte_carlo(cfg)
    out = _out_dir(args)
    evaluation.save_report(report, out / "report.csv")
    return 0


def cmd_nmf_compare(args) -> int:
    dm = _load_matrix_arg(args.x)
    if not 1 <= args.r <= min(dm.X.shape):
        raise ValueError(f"invalid r={args.r} for matrix shape {dm.X.shape}")
    grid = _parse_index_list(args.iter_grid)
    rows = nmf.compare_solvers(dm.X, args.r, restarts=args.restarts,
                               iter_grid=grid, base_seed=args.seed,
                               alpha=args.alpha, beta=args.beta)
    out = _out_dir(args)
    with open(out / "nmf_compare.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("solver,iteration,objective,eps_w,eps_h\n")
        for row in rows:
            fh.write(f"{row.solver},{row.iteration},{format_float(row.objective)},"
                     f"{format_float(row.eps_W)},{format_float(row.eps_H)}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="gclust",
        description="Cluster a time series of interaction graphs by denoised "
                    "non-negative factorization with AICc model selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", formatter_class=fmt,
                       help="events file -> binned, optionally contracted, vectorized matrix")
    p.add_argument("--events", required=True, help="event file: time, source, target[, action]")
    p.add_argument("--delimiter", default="\t", help="event file column separator")
    p.add_argument("--header", action="store_true", help="skip a header line")
    p.add_argument("--skip-bad-lines", action="store_true",
                   help="drop malformed lines (and count them) instead of failing")
    p.add_argument("--bins", type=int, default=10, help="number of uniform time bins")
    p.add_argument("--boundaries", default=None,
                   help="explicit comma-separated bin boundaries starting at 0")
    p.add_argument("--horizon", type=float, default=None, help="right end of the window")
    p.add_argument("--n", type=int, default=None, help="vertex count (default: max id + 1)")
    p.add_argument("--map", default=None, help="contraction map file: vertex_id group_id")
    p.add_argument("--symmetrize", action="store_true",
                   help="credit each event to both ordered pairs")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gclust", formatter_class=fmt,
                       help="cluster the columns of a data matrix; fixed r or AICc scan")
    p.add_argument("--x", required=True, help="data matrix CSV (with .meta.json sidecar)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--r", type=int, default=None, help="fixed inner dimension")
    group.add_argument("--select-dim", action="store_true",
                       help="scan inner dimensions and pick the AICc minimizer")
    p.add_argument("--r-min", type=int, default=1, help="first r of the scan")
    p.add_argument("--r-max", type=int, default=None,
                   help="last r of the scan (default min(T, 12))")
    p.add_argument("--solver", choices=list(nmf.SOLVERS), default="ls")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9, help="NMF convergence tolerance")
    p.add_argument("--max-iter", type=int, default=2000, help="NMF iteration cap")
    p.add_argument("--alpha", type=float, default=0.0, help="W regularizer (ls solver)")
    p.add_argument("--beta", type=float, default=0.0, help="H regularizer (ls solver)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gclust)

    p = sub.add_parser("diagnose", formatter_class=fmt,
                       help="contraction-quality report from standardized residuals")
    p.add_argument("--x", required=True, help="data matrix CSV (with .meta.json sidecar)")
    p.add_argument("--map", default=None, help="contraction map file to apply first")
    p.add_argument("--t", type=int, default=None, help="slice to diagnose (default: all)")
    p.add_argument("--select", default=None,
                   help="comma-separated vertex indices for the sketch (default: all)")
    p.add_argument("--usvt-constant", type=float, default=2.02)
    p.add_argument("--clip-percentile", type=float, default=99.9)
    p.add_argument("--mean-floor", type=float, default=None,
                   help="floor for the estimated means (default: fail on non-positive)")
    p.add_argument("--baseline-reps", type=int, default=100_000)
    p.add_argument("--baseline-seed", type=int, default=0)
    p.add_argument("--cache-dir", default=None, help="baseline cache directory")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", formatter_class=fmt,
                       help="write a simulated or reference data matrix")
    p.add_argument("--preset", choices=["block", "two-pattern", "swimmer"], default="block")
    p.add_argument("--config", default=None, help="benchmark config JSON (block preset)")
    p.add_argument("--rho", type=float, default=1.0, help="intensity scale (block preset)")
    p.add_argument("--m", type=int, default=5, help="vertices per block (block preset)")
    p.add_argument("--T", type=int, default=10, help="number of slices (block preset)")
    p.add_argument("--kappa", type=float, default=0.1, help="two-pattern contrast")
    p.add_argument("--copies", type=int, default=5, help="columns per pattern")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", formatter_class=fmt,
                       help="run the Monte Carlo method comparison from a config file")
    p.add_argument("--config", required=True, help="MonteCarloConfig JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("nmf-compare", formatter_class=fmt,
                       help="median convergence traces of the two NMF solvers")
    p.add_argument("--x", required=True, help="data matrix CSV (with .meta.json sidecar)")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iter-grid", default="0,10,100,1000",
                   help="comma-separated iteration checkpoints")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_nmf_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError, KeyError, RuntimeError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
