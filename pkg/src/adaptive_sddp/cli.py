"""Command-line front end: ``generate``, ``solve``, ``compare``, ``dep`` and ``validate``.

Exit codes: 0 success, 1 usage, 2 I/O or parse failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dep import DepError, solve_dep
from .engine import CautiousPassError, SubproblemError
from .fileio import (
    ConfigError,
    InstanceParseError,
    load_config,
    read_instance,
    write_instance,
    write_log,
)
from .hydro import HydroConfig, generate_hydro
from .lattice import LatticeError, SolverConfig, validate_lattice
from .lp import LPNumericalError
from .progress import ProgressLog
from .variants import VARIANTS, SubproblemInfeasible, VariantSpec, run_variant

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_hydro_flags(p):
    p.add_argument("--T", type=int, default=25, help="planning horizon (default 25)")
    p.add_argument("--xi", type=int, default=50, help="realizations per stage (default 50)")


def _add_solver_flags(p):
    p.add_argument("--config", help="JSON config document (overridden by $ADAPTIVE_SDDP_CONFIG)")
    p.add_argument("--nu", type=float, help="coarse-tree size that ends the apep preprocessing")
    p.add_argument("--stall-n", type=int, help="stall window length")
    p.add_argument("--stall-eps", type=float, help="relative stall tolerance")
    p.add_argument("--dual-eps", type=float, help="relative dual distance for refinement")
    p.add_argument("--cut-eps", type=float, help="relative cut violation tolerance")
    p.add_argument("--importance-Z", type=float, help="spap stage importance threshold")
    p.add_argument("--samples-per-iter", type=int, help="forward paths per iteration")
    p.add_argument("--time-limit", type=float, help="seconds per run")
    p.add_argument("--max-iter", type=int, help="iterations per run")
    p.add_argument("--eval-samples", type=int, default=0, help="paths for the final statistical bound")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptive-sddp", description="SDDP with adaptive scenario partitions")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic hydro-thermal instance")
    _add_hydro_flags(g)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--reservoirs", type=int, default=1)
    g.add_argument("--thermal", type=int, default=2)
    g.add_argument("--config", help="JSON config document; its hydro section is the base")
    g.add_argument("-o", "--output", required=True)

    s = sub.add_parser("solve", help="run one variant on an instance")
    s.add_argument("instance")
    s.add_argument("--variant", default=None, help="|".join(VARIANTS))
    s.add_argument("--seed", type=int)
    s.add_argument("--log", help="progress table path (summary and cuts go next to it)")
    s.add_argument("--format", choices=("table", "delimited"), default="table")
    _add_solver_flags(s)

    c = sub.add_parser("compare", help="run several variants under one budget and tabulate %%LB")
    c.add_argument("instance")
    c.add_argument("--variant", action="append", help="repeat or comma-separate; default all")
    c.add_argument("--seed", type=int)
    c.add_argument("--checkpoints", help="comma-separated seconds (default: quarters of the time limit)")
    c.add_argument("--checkpoint-iters", help="comma-separated iteration checkpoints instead of seconds")
    c.add_argument("--log", help="directory for per-variant logs")
    c.add_argument("--format", choices=("table", "delimited"), default="table")
    _add_solver_flags(c)

    d = sub.add_parser("dep", help="solve the extensive form")
    d.add_argument("instance")
    d.add_argument("--solver", choices=("highs", "simplex"), default="highs")
    d.add_argument("--seed", type=int, help="accepted for uniformity; the extensive form is deterministic")
    d.add_argument("--format", choices=("table", "delimited"), default="table")

    v = sub.add_parser("validate", help="check an instance or config file")
    v.add_argument("path")
    v.add_argument("--seed", type=int, help="accepted for uniformity")
    return parser


# ------------------------------------------------------------------ helpers


def solver_config(args) -> tuple:
    cfg_doc = load_config(args.config)
    cfg: SolverConfig = cfg_doc["solver"]
    updates = {
        "preprocess_threshold": args.nu,
        "stall_window": args.stall_n,
        "stall_tolerance": args.stall_eps,
        "refine_tolerance": args.dual_eps,
        "cut_violation_tolerance": args.cut_eps,
        "importance_threshold": args.importance_Z,
        "sample_paths_per_iter": args.samples_per_iter,
        "time_limit": args.time_limit,
        "max_iterations": args.max_iter,
        "rng_seed": args.seed,
    }
    cfg = replace(cfg, **{k: v for k, v in updates.items() if v is not None})
    problems = cfg.problems()
    if problems:
        raise UsageError("; ".join(problems))
    return cfg, cfg_doc


def _print_rows(header: Sequence[str], rows: List[Sequence], fmt: str, out) -> None:
    if fmt == "delimited":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    cells = [[str(h) for h in header]] + [[str(x) for x in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        out.write("  ".join(x.rjust(w) for x, w in zip(r, widths)).rstrip() + "\n")


def _fmt(x: float, fmt: str = "table") -> str:
    if fmt == "delimited":
        return repr(x)
    return f"{x:.6f}" if math.isfinite(x) else str(x)


# ------------------------------------------------------------------ commands


def cmd_generate(args, out) -> int:
    base = load_config(args.config)["hydro"] if args.config else HydroConfig()
    cfg = replace(base, horizon=args.T, realizations=args.xi, seed=args.seed, n_reservoirs=args.reservoirs, n_thermal=args.thermal)
    problems = cfg.problems()
    if problems:
        raise UsageError("; ".join(problems))
    lattice = generate_hydro(cfg)
    write_instance(lattice, args.output)
    st = lattice.stage(2)
    out.write(
        f"wrote {args.output}: T = {lattice.horizon}, |Xi| = {st.n_realizations}, "
        f"n = {st.n_vars}, m = {st.n_rows}, seed = {cfg.seed}\n"
    )
    return EXIT_OK


def cmd_solve(args, out) -> int:
    cfg, doc = solver_config(args)
    name = args.variant or doc["variant"] or "sddp-qp"
    spec = VariantSpec(name, cfg, doc["stage_classes"])
    lattice = read_instance(args.instance)
    log = run_variant(spec, lattice, evaluation_samples=args.eval_samples)
    if args.log:
        write_log(log, args.log)
    rows = [
        (r.iteration, f"{r.wall_seconds:.3f}", _fmt(r.lower_bound, args.format), r.cuts_fine + r.cuts_coarse + r.cuts_semicoarse, r.phase)
        for r in log.records
    ]
    if args.format == "delimited":
        _print_rows(("iteration", "wall_seconds", "lower_bound", "cuts", "phase"), rows, "delimited", out)
    else:
        step = max(1, len(rows) // 20)
        shown = rows[::step] + ([rows[-1]] if rows and (len(rows) - 1) % step else [])
        _print_rows(("iter", "seconds", "lower bound", "cuts", "phase"), shown, "table", out)
    out.write(f"variant {spec.name}: {len(log.records)} iterations, final lower bound {log.final_lower_bound!r} ({log.termination})\n")
    if log.final_bounds:
        out.write(f"statistical upper bound {log.final_bounds['statistical_upper']!r}\n")
    return EXIT_OK


def parse_variants(values: Optional[List[str]]) -> List[str]:
    if not values:
        return list(VARIANTS)
    names = [v for item in values for v in item.split(",") if v.strip()]
    return [VariantSpec(n).name for n in names]


def percent_lb(lb: float, ref: float) -> float:
    """``100 (LB - LB_ref) / LB_ref``; zero when both are zero."""
    if ref == 0:
        return 0.0 if lb == 0 else math.copysign(math.inf, lb)
    return 100.0 * (lb - ref) / abs(ref)


def comparison_rows(logs: Dict[str, ProgressLog], checkpoints: Sequence[float], by_iteration: bool = False):
    """One row per (variant, checkpoint) with the LB and %LB against sddp-qp (or the first variant)."""
    ref_name = "sddp-qp" if "sddp-qp" in logs else next(iter(logs))
    rows = []
    for cp in checkpoints:
        key = {"iteration": int(cp)} if by_iteration else {"seconds": cp}
        ref = logs[ref_name].lower_bound_at(**key)
        for name, log in logs.items():
            lb = log.lower_bound_at(**key)
            rows.append((name, cp, lb, percent_lb(lb, ref)))
    return ref_name, rows


def cmd_compare(args, out) -> int:
    cfg, doc = solver_config(args)
    names = parse_variants(args.variant)
    lattice = read_instance(args.instance)
    logs: Dict[str, ProgressLog] = {}
    failed = None
    for name in names:
        try:
            logs[name] = run_variant(VariantSpec(name, cfg, doc["stage_classes"]), lattice)
        except (SubproblemError, CautiousPassError, LPNumericalError, SubproblemInfeasible) as exc:
            failed = (name, exc)
            break
        if args.log:
            Path(args.log).mkdir(parents=True, exist_ok=True)
            write_log(logs[name], Path(args.log) / f"{name}.csv")
    by_iter = bool(args.checkpoint_iters)
    if by_iter:
        checkpoints = [int(x) for x in args.checkpoint_iters.split(",")]
    elif args.checkpoints:
        checkpoints = [float(x) for x in args.checkpoints.split(",")]
    else:
        checkpoints = [cfg.time_limit * q for q in (0.25, 0.5, 1.0)]
    if logs:
        ref, rows = comparison_rows(logs, checkpoints, by_iter)
        unit = "iteration" if by_iter else "seconds"
        table = [(n, cp, _fmt(lb, args.format), f"{p:.2f}%") for n, cp, lb, p in rows]
        _print_rows(("variant", unit, "lower_bound", f"%LB_vs_{ref}"), table, args.format, out)
    if failed:
        out.write(f"PARTIAL: variant {failed[0]} failed: {failed[1]}\n")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_dep(args, out) -> int:
    lattice = read_instance(args.instance)
    res = solve_dep(lattice, solver=args.solver)
    if args.format == "delimited":
        _print_rows(("z_star", "n_nodes"), [(repr(res.value), res.n_nodes)], "delimited", out)
        out.write("x1," + ",".join(repr(float(v)) for v in res.first_stage) + "\n")
    else:
        out.write(f"z* = {res.value!r}\n")
        out.write(f"nodes = {res.n_nodes}\n")
        out.write("x1 = " + np.array2string(res.first_stage, precision=6, max_line_width=100) + "\n")
    return EXIT_OK


def cmd_validate(args, out) -> int:
    path = Path(args.path)
    if path.suffix == ".json":
        text = path.read_text(encoding="utf-8")
        try:
            json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        from .fileio import parse_config

        parse_config(json.loads(text))
        out.write(f"{path}: valid config\n")
        return EXIT_OK
    lattice = read_instance(path)
    problems = validate_lattice(lattice)
    for p in problems:
        out.write(f"{path}: {p}\n")
    if problems:
        return EXIT_IO
    out.write(f"{path}: valid instance, T = {lattice.horizon}, sizes = {lattice.sizes()}\n")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "dep": cmd_dep,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, (InstanceParseError, ConfigError, LatticeError)):
            err.write(f"error: {exc}\n")
            return EXIT_IO
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        err.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except SubproblemInfeasible as exc:
        err.write(f"solver error: {exc}; instances need relatively complete recourse\n")
        return EXIT_SOLVER
    except (SubproblemError, CautiousPassError, LPNumericalError, DepError) as exc:
        err.write(f"solver error: {exc}\n")
        return EXIT_SOLVER


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
