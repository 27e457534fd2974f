"""Command-line entry point: ``diffuse {gen,smooth,validate,bench,info}``.

Exit codes: 0 success, 1 check or run failure, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from . import __version__
from .bench import BenchmarkConfig, emit_csv, emit_table, parse_grid_spec, run_benchmark
from .errors import ConfigurationError, DiffuseError, InvalidArgumentError, MapFormatError, MapValidationError
from .execution import ENV_THREADS, ExecPlan, ExecutionMode, resolve_thread_count
from .grid import build_stretched_grid
from .integrator import advance
from .mapio import gen_harmonic, gen_noise, read_map, write_map
from .operator import build_operator

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

MODE_HELP = (
    "execution mode: serial (single thread; the 'Serial' code version), "
    "parallel-loops (parallel grid sweeps, ordered reductions; the 'New' version), "
    "parallel-all (sweeps and reductions parallel, reductions by a combining tree; "
    "the 'Experimental' version)"
)
THREADS_HELP = f"worker threads (default: ${ENV_THREADS}, else the logical core count)"


class UsageError(Exception):
    pass


def _count(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    return n


def _grid_count(text: str) -> int:
    n = _count(text)
    if n < 3:
        raise argparse.ArgumentTypeError(f"grid node counts must be >= 3, got {n}")
    return n


def _mode(text: str) -> ExecutionMode:
    try:
        return ExecutionMode.parse(text)
    except InvalidArgumentError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _csv_list(conv):
    def parse(text: str):
        try:
            return [conv(part) for part in text.split(",") if part.strip()]
        except (InvalidArgumentError, ValueError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffuse",
        description="Spherical surface diffusion with RKL2 super-time-stepping.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = sub.add_parser("gen", help="generate a synthetic map",
                         description="Write a harmonic or noise map; .csv output selects CSV, anything else SDM1.")
    gen.add_argument("--type", required=True, choices=["harmonic", "noise"], help="kind of map")
    gen.add_argument("--nt", type=_grid_count, required=True, help="colatitude nodes, poles included (>= 3)")
    gen.add_argument("--np", type=_grid_count, required=True, help="longitude nodes (>= 3)")
    gen.add_argument("--stretch", type=float, default=0.0,
                     help="equatorial clustering strength in [0, 1) (default 0: uniform)")
    gen.add_argument("--l", type=int, default=None, help="harmonic degree (harmonic only)")
    gen.add_argument("--m", type=int, default=None, help="harmonic order, |m| <= l (harmonic only, default 0)")
    gen.add_argument("--phase", type=float, default=None, help="longitude phase in radians (harmonic only)")
    gen.add_argument("--seed", type=int, default=None, help="64-bit generator seed (noise only, default 0)")
    gen.add_argument("--amplitude", type=float, default=None, help="noise amplitude (noise only, default 1)")
    gen.add_argument("-o", "--out", required=True, help="output path (.sdm or .csv)")

    sm = sub.add_parser("smooth", help="diffuse a map for a given time",
                        description="Read a map, advance the diffusion equation, write the result.")
    sm.add_argument("input", help="input map (.sdm or .csv)")
    sm.add_argument("output", help="output map (.sdm or .csv)")
    sm.add_argument("--time", type=float, required=True, help="total diffusion time (>= 0)")
    sm.add_argument("--steps", type=_count, required=True, help="number of RKL2 super-steps (>= 0)")
    sm.add_argument("--nu", type=float, default=1.0, help="constant diffusivity (default 1)")
    sm.add_argument("--mode", type=_mode, default=ExecutionMode.SERIAL, help=MODE_HELP)
    sm.add_argument("--threads", type=str, default=None, help=THREADS_HELP)

    va = sub.add_parser("validate", help="run the numerical self-checks",
                        description="Decay, convergence, conservation, oracle, determinism and accounting checks.")
    va.add_argument("--level", choices=["fast", "full"], default="fast",
                    help="fast: reduced grids; full: acceptance-scale grids")
    va.add_argument("--threads", type=str, default=None, help=THREADS_HELP)

    be = sub.add_parser("bench", help="time smoothing runs across modes and thread counts",
                        description="Repeated timed runs; emits per-repetition and summary statistics.")
    be.add_argument("--grid", type=_csv_list(parse_grid_spec), action="extend", default=None,
                    help="grid size NTxNP, repeatable or comma-separated (default 256x512)")
    be.add_argument("--modes", type=_csv_list(ExecutionMode.parse), default=[ExecutionMode.SERIAL],
                    help="comma-separated modes: serial, parallel-loops, parallel-all (default serial)")
    be.add_argument("--threads", type=str, default=None,
                    help=f"comma-separated thread counts for parallel modes (default: ${ENV_THREADS}, else core count)")
    be.add_argument("--reps", type=_count, default=10, help="timed repetitions per point (default 10)")
    be.add_argument("--warmup", type=_count, default=1, help="untimed warmup runs per point (default 1)")
    be.add_argument("--steps", type=_count, default=20, help="super-steps per run (default 20)")
    be.add_argument("--time", type=float, default=1e-4, help="diffusion time per run (default 1e-4)")
    be.add_argument("--nu", type=float, default=1.0, help="constant diffusivity (default 1)")
    be.add_argument("--seed", type=int, default=0, help="noise seed for the input map (default 0)")
    be.add_argument("--stretch", type=float, default=0.0, help="grid clustering strength (default 0)")
    be.add_argument("--csv", default=None, help="write CSV here ('-' for stdout)")
    be.add_argument("--table", action="store_true", help="print a markdown summary table")

    sub.add_parser("info", help="show version, cores and thread resolution")
    return parser


def _threads(raw: Optional[str]) -> int:
    return resolve_thread_count(raw, os.environ.get(ENV_THREADS))


def cmd_gen(args) -> int:
    harmonic_only = {"--l": args.l, "--m": args.m, "--phase": args.phase}
    noise_only = {"--seed": args.seed, "--amplitude": args.amplitude}
    if args.type == "harmonic":
        stray = [k for k, v in noise_only.items() if v is not None]
        if stray:
            raise UsageError(f"{', '.join(stray)} cannot be used with --type harmonic")
        if args.l is None:
            raise UsageError("--type harmonic requires --l")
    else:
        stray = [k for k, v in harmonic_only.items() if v is not None]
        if stray:
            raise UsageError(f"{', '.join(stray)} cannot be used with --type noise")
    try:
        grid = build_stretched_grid(args.nt, args.np, args.stretch)
        if args.type == "harmonic":
            field = gen_harmonic(grid, args.l, args.m or 0, args.phase or 0.0)
        else:
            field = gen_noise(grid, args.seed or 0, 1.0 if args.amplitude is None else args.amplitude)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    write_map(args.out, grid, field)
    print(f"wrote {args.type} map {grid.nt}x{grid.np} to {args.out}")
    return EXIT_OK


def cmd_smooth(args) -> int:
    if args.time < 0 or args.steps < 0:
        raise UsageError("--time and --steps must be >= 0")
    if args.steps == 0 and args.time > 0:
        raise UsageError("--steps 0 cannot cover a positive --time")
    threads = _threads(args.threads)
    try:
        grid, field = read_map(args.input)
    except (MapFormatError, MapValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        op = build_operator(grid, args.nu)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    with ExecPlan(args.mode, threads) as plan:
        result, stats = advance(op, field, args.time, args.steps, plan)
    write_map(args.output, grid, result)
    stages = sorted(set(stats.stage_counts))
    print(f"grid {grid.nt}x{grid.np}, mode {plan.mode.value}, threads {plan.threads}")
    print(f"steps_taken {stats.steps_taken}")
    print(f"dt {stats.dt!r} (explicit limit {stats.dt_expl!r})")
    print(f"stages_per_step {','.join(str(s) for s in stages) if stages else '-'}")
    print(f"total_operator_applications {stats.total_operator_applications}")
    print(f"stencil_sweeps {stats.stencil_sweeps}")
    print(f"elapsed_sim_time {stats.elapsed_sim_time!r}")
    print(f"area_weighted_sum {stats.mass_initial!r} -> {stats.mass_final!r}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import run_checks

    threads = _threads(args.threads)
    results = run_checks(args.level, threads=threads)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_bench(args) -> int:
    if args.threads is None:
        threads = [_threads(None)]
    else:
        try:
            threads = [resolve_thread_count(t.strip(), None) for t in args.threads.split(",") if t.strip()]
        except ConfigurationError as exc:
            raise UsageError(str(exc)) from None
    cfg = BenchmarkConfig(grids=args.grid or [(256, 512)], modes=args.modes, threads=threads,
                          repetitions=args.reps, warmup=args.warmup, steps=args.steps,
                          total_time=args.time, nu=args.nu, seed=args.seed, stretch=args.stretch,
                          speedup=ExecutionMode.SERIAL in args.modes)
    try:
        cfg.validate()
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    report = run_benchmark(cfg)
    if args.csv == "-":
        sys.stdout.write(emit_csv(report))
    elif args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(emit_csv(report))
    if args.table or not args.csv:
        sys.stdout.write(emit_table(report))
    for r in report.failed:
        print(f"error: point {r.point.mode.value} {r.point.nt}x{r.point.np} "
              f"threads={r.point.threads} failed: {r.error}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_info(args) -> int:
    import numba
    import numpy

    print(f"diffuse {__version__}")
    print(f"numpy {numpy.__version__}, numba {numba.__version__}")
    print(f"logical cores {os.cpu_count()}")
    env = os.environ.get(ENV_THREADS)
    print(f"{ENV_THREADS}={env if env is not None else '(unset)'} -> threads {_threads(None)}")
    for mode in ExecutionMode:
        print(f"mode {mode.value}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "smooth": cmd_smooth, "validate": cmd_validate,
            "bench": cmd_bench, "info": cmd_info}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as exc:
        print(f"diffuse {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DiffuseError, OSError) as exc:
        print(f"diffuse {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
