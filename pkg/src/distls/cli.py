"""Command-line experiment harness.

Subcommands: ``generate``, ``solve``, ``compare``, ``reproduce-fig2``.
Exit codes: 0 converged, 1 bad input, 2 iteration cap reached,
3 line-search failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from distls.errors import DistLSError
from distls.graph import random_connected_graph
from distls.problem import (
    ExpCapacityCost,
    FlowProblem,
    format_problem,
    parse_problem_text,
    random_rates,
)
from distls.solver import MODES, IterationRecord, SolverConfig, solve

EXIT_CODES = {"converged": 0, "max-iter": 2, "line-search-failure": 3}
EXIT_BAD_INPUT = 1
FIG2_COLUMNS = ("size", "N", "seed", "mode", "iters_to_unit_step", "converged")
FIG2_MODES = ("addn-centralized-ls", "addn-distributed-ls")


class _Parser(argparse.ArgumentParser):
    # exit 2 is reserved for "iteration cap reached"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def trajectory_csv(traj):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(IterationRecord.FIELDS)
    for rec in traj:
        w.writerow([_fmt(v) for v in rec.row()])
    return buf.getvalue()


def instance_digest(problem):
    return hashlib.sha256(format_problem(problem).encode()).hexdigest()


def _add_instance_args(p):
    p.add_argument("--nodes", type=int, default=25)
    p.add_argument("--edges", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate-scale", type=float, default=5.0, help="std. dev. of the random node rates")
    p.add_argument("--c", type=float, default=1.0, help="capacity coefficient of every edge")
    p.add_argument("--graph-file", type=Path, help="graph or problem file; rates drawn from --seed if absent")


def _add_solver_args(p, mode=True):
    p.add_argument("--N", type=int, default=1)
    if mode:
        p.add_argument("--mode", choices=MODES, default="addn-distributed-ls")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--fixed-step", type=float, default=1e-2)
    p.add_argument("--max-backtracks", type=int, default=60)
    p.add_argument("--use-simulator", action="store_true")


def build_parser():
    parser = _Parser(prog="distls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a random problem file")
    _add_instance_args(g)
    g.add_argument("--out", type=Path, help="output path (default stdout)")

    s = sub.add_parser("solve", help="solve one instance and write its trajectory")
    _add_instance_args(s)
    _add_solver_args(s)
    s.add_argument("--out", type=Path, help="trajectory CSV path (default stdout)")
    s.add_argument("--summary", type=Path, help="also write the JSON summary here")
    s.add_argument("--trace-rounds", type=Path, help="round log, one 'k phase round msgs' line per round")

    c = sub.add_parser("compare", help="centralized vs distributed line search on one instance")
    _add_instance_args(c)
    _add_solver_args(c, mode=False)
    c.add_argument("--out", type=Path, required=True, help="output directory")

    f = sub.add_parser("reproduce-fig2", help="iterations to unit stepsize over a seed grid")
    f.add_argument("--sizes", default="25x100,50x200,100x400", help="comma-separated NxE list")
    f.add_argument("--N-values", default="1,2,3")
    f.add_argument("--seeds", type=int, default=50, help="seeds 0..seeds-1")
    f.add_argument("--rate-scale", type=float, default=5.0)
    f.add_argument("--c", type=float, default=1.0)
    _add_solver_args(f, mode=False)
    f.add_argument("--jobs", type=int, default=1)
    f.add_argument("--out", type=Path, required=True, help="long-format CSV path")
    f.add_argument("--summary", type=Path, help="per-cell summary JSON (default next to --out)")
    return parser


def load_instance(args):
    if args.graph_file is not None:
        graph, b, c = parse_problem_text(args.graph_file.read_text())
        if b is None:
            b = random_rates(graph.n, args.seed, args.rate_scale)
        return FlowProblem(graph, b, ExpCapacityCost(c))
    graph = random_connected_graph(args.nodes, args.edges, args.seed)
    return FlowProblem(graph, random_rates(args.nodes, args.seed, args.rate_scale), ExpCapacityCost(args.c))


def config_from(args, mode):
    return SolverConfig(
        N=args.N, mode=mode, sigma=args.sigma, beta=args.beta, fixed_step=args.fixed_step,
        grad_tol=args.grad_tol, max_iter=args.max_iter, seed=getattr(args, "seed", 0),
        max_backtracks=args.max_backtracks,
        use_simulator=args.use_simulator and mode == "addn-distributed-ls",
    )


def summarize(problem, config, result):
    last = result.trajectory[-1]
    out = {
        "n": problem.n,
        "E": problem.E,
        "instance_sha256": instance_digest(problem),
        "termination": result.termination,
        "iterations": len(result.trajectory) - 1,
        "iterations_to_unit_stepsize": result.iterations_to_unit_stepsize,
        "final_q": last.q,
        "final_primal": last.primal,
        "final_feasibility": last.feasibility,
        "final_grad_inf": float(np.max(np.abs(result.g))),
        "config": config.as_dict(),
    }
    if result.spectral:
        out["rho_bar_initial"] = result.spectral[0].rho_bar
    if result.error is not None:
        out["error"] = str(result.error)
    return out


def _dump(obj):
    return json.dumps(obj, sort_keys=True)


def cmd_generate(args):
    text = format_problem(load_instance(args))
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return 0


def cmd_solve(args):
    problem = load_instance(args)
    config = config_from(args, args.mode)
    if args.trace_rounds is not None and not config.use_simulator:
        raise DistLSError("--trace-rounds needs --use-simulator with addn-distributed-ls")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = solve(problem, config)
    summary = summarize(problem, config, result)
    summary["warnings"] = [str(w.message) for w in caught]
    table = trajectory_csv(result.trajectory)
    if args.out is None:
        sys.stdout.write(table)
        print(_dump(summary), file=sys.stderr)
    else:
        args.out.write_text(table)
        print(_dump(summary))
    if args.summary is not None:
        args.summary.write_text(_dump(summary) + "\n")
    if args.trace_rounds is not None:
        lines = [ln for log in result.round_logs for ln in log.lines()]
        args.trace_rounds.write_text("".join(ln + "\n" for ln in lines))
    return EXIT_CODES[result.termination]


def cmd_compare(args):
    problem = load_instance(args)
    args.out.mkdir(parents=True, exist_ok=True)
    summary = {"instance_sha256": instance_digest(problem), "n": problem.n, "E": problem.E}
    results = {}
    for mode, stem in (("addn-centralized-ls", "centralized"), ("addn-distributed-ls", "distributed")):
        config = config_from(args, mode)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = solve(problem, config)
        results[stem] = res
        (args.out / f"{stem}.csv").write_text(trajectory_csv(res.trajectory))
        summary[stem] = summarize(problem, config, res)
    qc = results["centralized"].trajectory[-1].q
    qd = results["distributed"].trajectory[-1].q
    summary["same_instance"] = summary["centralized"]["instance_sha256"] == summary["distributed"]["instance_sha256"]
    summary["final_q_gap"] = abs(qc - qd)
    summary["final_q_rel_gap"] = abs(qc - qd) / max(1.0, abs(qc))
    (args.out / "summary.json").write_text(_dump(summary) + "\n")
    print(_dump(summary))
    worst = max(EXIT_CODES[r.termination] for r in results.values())
    return worst


def _parse_sizes(text):
    sizes = []
    for tok in text.split(","):
        n, E = tok.lower().split("x")
        sizes.append((int(n), int(E)))
    return sizes


def fig2_run(job):
    """One (size, N, seed) cell: both line-search modes on the same instance."""
    (n, E), N, seed, opts = job
    problem = FlowProblem(random_connected_graph(n, E, seed), random_rates(n, seed, opts["rate_scale"]),
                          ExpCapacityCost(opts["c"]))
    rows = []
    for mode in FIG2_MODES:
        config = SolverConfig(N=N, mode=mode, sigma=opts["sigma"], beta=opts["beta"], grad_tol=opts["grad_tol"],
                              max_iter=opts["max_iter"], seed=seed,
                              use_simulator=opts["use_simulator"] and mode == "addn-distributed-ls")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = solve(problem, config)
            itu, conv = res.iterations_to_unit_stepsize, res.converged
        except DistLSError:
            itu, conv = None, False
        rows.append((f"{n}x{E}", N, seed, mode, itu, conv))
    return rows


def fig2_cell_summary(rows):
    cells = {}
    for size, N, _, mode, itu, conv in rows:
        cells.setdefault((size, N, mode), []).append((itu, conv))
    out = []
    for (size, N, mode), vals in cells.items():
        done = [itu for itu, conv in vals if conv and itu is not None]
        entry = {"size": size, "N": N, "mode": mode, "runs": len(vals),
                 "converged": sum(1 for _, conv in vals if conv), "unit_step_reached": len(done)}
        if done:
            q1, med, q3 = np.percentile(done, [25, 50, 75])
            entry.update(median=float(med), q1=float(q1), q3=float(q3), max=int(max(done)))
        out.append(entry)
    return out


def _size_key(size):
    n, E = size.split("x")
    return int(n), int(E)


def cmd_reproduce_fig2(args):
    sizes = _parse_sizes(args.sizes)
    Ns = [int(v) for v in args.N_values.split(",")]
    opts = dict(rate_scale=args.rate_scale, c=args.c, sigma=args.sigma, beta=args.beta, grad_tol=args.grad_tol,
                max_iter=args.max_iter, use_simulator=args.use_simulator)
    jobs = [(size, N, seed, opts) for size in sizes for N in Ns for seed in range(args.seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            batches = list(pool.map(fig2_run, jobs))
    else:
        batches = [fig2_run(job) for job in jobs]
    rows = sorted((r for batch in batches for r in batch), key=lambda r: (_size_key(r[0]), r[1], r[2], r[3]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIG2_COLUMNS)
    for size, N, seed, mode, itu, conv in rows:
        w.writerow([size, N, seed, mode, "" if itu is None else itu, int(conv)])
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(buf.getvalue())
    cells = sorted(fig2_cell_summary(rows), key=lambda c: (_size_key(c["size"]), c["N"], c["mode"]))
    summary_path = args.summary or args.out.with_suffix(".summary.json")
    summary_path.write_text(_dump({"cells": cells, "options": opts, "seeds": args.seeds}) + "\n")
    print(_dump({"rows": len(rows), "cells": len(cells), "csv": str(args.out), "summary": str(summary_path)}))
    return 0 if all(conv for *_, conv in rows) else 2


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "reproduce-fig2": cmd_reproduce_fig2,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return COMMANDS[args.command](args)
    except (DistLSError, OSError, ValueError) as exc:
        print(f"distls {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
