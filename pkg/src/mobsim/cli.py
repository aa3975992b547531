"""Command-line front end: ``mobsim compare | estimate-mu | sensitivity | slice-match``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import experiments as exp
from .errors import InvalidParameterError, MobsimError, SolverFailureError
from .io import (
    build_report,
    dumps_report,
    format_cell,
    load_tableau,
    parse_grid,
    tableau_digest,
    write_rows,
)
from .metrics import DEFAULT_MU, compare_with_plans, estimate_mu
from .solver import SolverConfig
from .tableau import GridSpec

log = logging.getLogger("mobsim")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_GRID = 4
EXIT_SCENARIO = 5
EXIT_WINDOW = 6


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _grid(text, cell_width=1.0) -> GridSpec:
    try:
        return parse_grid(text, cell_width)
    except InvalidParameterError as exc:
        raise CliError(str(exc), EXIT_GRID) from None


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _solver(args) -> SolverConfig:
    tie = {"shift": "prefer_shift", "adddelete": "prefer_add_delete"}[args.tie_break]
    return SolverConfig(tie_break=tie)


def _emit(doc: dict, out):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n" if not isinstance(doc, str) else doc
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_compare(args):
    grid = _grid(args.grid, args.cell_width)
    X = load_tableau(args.x, grid)
    Y = load_tableau(args.y, grid)
    cfg = _solver(args)
    t0 = time.perf_counter()
    report, plan, nplan = compare_with_plans(X, Y, cfg, args.mu)
    elapsed = time.perf_counter() - t0
    stats = {
        "raw": plan.stats,
        "normalized": None if nplan is None else nplan.stats,
        "wall_time_s": elapsed,
    }
    digests = {
        "x": {"path": str(args.x), "sha256": tableau_digest(X), "vectors": len(X)},
        "y": {"path": str(args.y), "sha256": tableau_digest(Y), "vectors": len(Y)},
    }
    _emit(dumps_report(build_report(report, grid, cfg, digests, stats)), args.out)


def cmd_estimate_mu(args):
    grid = _grid(args.grid, args.cell_width)
    X = load_tableau(args.x, grid)
    est = estimate_mu(X, args.trials, args.seed)
    _emit({"mean_nsa": est.mean_nsa, "std_nsa": est.std_nsa, "trials": est.trials, "seed": est.seed}, args.out)


def cmd_sensitivity(args):
    if args.scenario not in exp.SCENARIOS:
        raise CliError(f"unknown scenario {args.scenario!r}; choose from {', '.join(exp.SCENARIOS)}", EXIT_SCENARIO)
    if args.scenario == "slice_match":
        raise CliError("slice matching runs through the slice-match command", EXIT_SCENARIO)
    grid = _grid(args.grid, args.cell_width)
    kwargs = dict(
        scenario=args.scenario, grid=grid, trials=args.trials, seed=args.seed, n_vectors=args.n_vectors,
        mu=args.mu, n_individuals=args.n_individuals, trips_per_individual=args.trips,
        replace_step=args.replace_step, solver=_solver(args),
    )
    if args.phis:
        kwargs["phis"] = _floats(args.phis)
    if args.omegas:
        kwargs["omegas"] = _floats(args.omegas)
    if args.ks:
        kwargs["ks"] = _ints(args.ks)
    cfg = exp.ScenarioConfig(**kwargs)
    if args.x and cfg.scenario != "data_source":
        X = load_tableau(args.x, grid)
        runner = {
            "uniform_scaling": lambda: exp.uniform_scaling_experiment(cfg, X),
            "random_scaling": lambda: exp.random_scaling_experiment(cfg, X, workers=args.workers),
            "spatial_exchange": lambda: exp.spatial_exchange_experiment(cfg, X, workers=args.workers),
            "mu_determination": lambda: exp.mu_determination_experiment(cfg, X, workers=args.workers),
        }[cfg.scenario]
        results = runner()
    else:
        results = exp.run_scenario(cfg, workers=args.workers)
    write_rows([r.row() for r in results], args.out_csv)
    if args.summary_csv:
        metric = {
            "uniform_scaling": "rrnsa", "random_scaling": "rrnsa", "spatial_exchange": "sp",
            "data_source": "nma", "mu_determination": "nsa",
        }[cfg.scenario]
        write_rows(exp.summarize(results, metric), args.summary_csv)


def cmd_slice_match(args):
    sgrid = _grid(args.source_grid, args.cell_width)
    tgrid = _grid(args.target_grid, args.cell_width)
    for g in (sgrid, tgrid):
        if args.slice_size < 1 or args.slice_size > min(g.shape):
            raise CliError(f"slice size {args.slice_size} does not fit a {g.rows_m}x{g.cols_n} grid", EXIT_WINDOW)
    source = load_tableau(args.source, sgrid)
    target = load_tableau(args.target, tgrid)
    anchor = _ints(args.source_anchor) if args.source_anchor else None
    if anchor is not None:
        x, y = anchor
        if x < 1 or y < 1 or x + args.slice_size - 1 > sgrid.rows_m or y + args.slice_size - 1 > sgrid.cols_n:
            raise CliError(f"source window at {anchor} overflows the source grid", EXIT_WINDOW)
    result = exp.slice_match_search(source, target, args.slice_size, anchor, args.mu, _solver(args),
                                    workers=args.workers)
    write_rows([s.row() for s in result.scores], args.out_csv,
               ["window_x", "window_y", "element", "rrnsa", "nsa", "r2", "rmse"])
    best = result.best
    summary = {
        "source_anchor": list(result.source_anchor),
        "slice_size": result.slice_size,
        "n_scores": len(result.scores),
        "best": None if best is None else {k: format_cell(v) if v is None else v for k, v in best.row().items()},
    }
    _emit(summary, args.summary)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mobsim", description="Mobility tableau similarity via least Manhattan transformation cost.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid_flag=True):
        if grid_flag:
            sp.add_argument("--grid", required=True, help="grid size as MxN")
        sp.add_argument("--cell-width", type=float, default=1.0, help="cell edge length in km")
        sp.add_argument("--tie-break", choices=("shift", "adddelete"), default="shift")
        sp.add_argument("--workers", type=int, default=None, help="parallel workers (default: MOBSIM_THREADS or 1)")

    c = sub.add_parser("compare", help="compare two flow files")
    common(c)
    c.add_argument("--x", required=True)
    c.add_argument("--y", required=True)
    c.add_argument("--mu", type=float, default=DEFAULT_MU)
    c.add_argument("--out", help="report path (default stdout)")
    c.set_defaults(func=cmd_compare)

    m = sub.add_parser("estimate-mu", help="NSA of a tableau against region-shuffled copies")
    common(m)
    m.add_argument("--x", required=True)
    m.add_argument("--trials", type=int, default=100)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.set_defaults(func=cmd_estimate_mu)

    s = sub.add_parser("sensitivity", help="run a sensitivity scenario and write its trial table")
    common(s, grid_flag=False)
    s.add_argument("--scenario", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid", default="20x20")
    s.add_argument("--x", help="reference flow file (default: synthetic)")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--n-vectors", type=int, default=2000)
    s.add_argument("--mu", type=float, default=DEFAULT_MU)
    s.add_argument("--phis", help="comma-separated scaling factors")
    s.add_argument("--omegas", help="comma-separated noise amplitudes")
    s.add_argument("--ks", help="comma-separated k values")
    s.add_argument("--n-individuals", type=int, default=1000)
    s.add_argument("--trips", type=int, default=10, help="trips per individual")
    s.add_argument("--replace-step", type=int, default=None, help="individuals replaced per unit of k")
    s.add_argument("--out-csv", required=True)
    s.add_argument("--summary-csv")
    s.set_defaults(func=cmd_sensitivity)

    sm = sub.add_parser("slice-match", help="score every target window against a source slice")
    common(sm, grid_flag=False)
    sm.add_argument("--source", required=True)
    sm.add_argument("--source-grid", required=True)
    sm.add_argument("--target", required=True)
    sm.add_argument("--target-grid", required=True)
    sm.add_argument("--slice-size", type=int, required=True)
    sm.add_argument("--source-anchor", help="X,Y of the source window (default: max-flow window)")
    sm.add_argument("--mu", type=float, default=DEFAULT_MU)
    sm.add_argument("--out-csv", required=True)
    sm.add_argument("--summary", help="best-match JSON path (default stdout)")
    sm.set_defaults(func=cmd_slice_match)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        print(f"mobsim: error: {exc}", file=sys.stderr)
        return exc.code
    except SolverFailureError as exc:
        print(f"mobsim: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (MobsimError, OSError) as exc:
        print(f"mobsim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
