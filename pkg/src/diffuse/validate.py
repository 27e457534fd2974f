"""Numerical and methodological self-checks behind ``diffuse validate``.

Each check returns a :class:`CheckResult` carrying the measured value next
to what it was compared against, so a failure report is self-explanatory.
The ``fast`` level runs every check at reduced scale; ``full`` runs them at
acceptance scale.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import testkit
from .bench import BenchmarkConfig, DEFAULT_REPETITIONS, emit_csv, parse_csv, run_benchmark
from .execution import ExecPlan, ExecutionMode
from .grid import area_weighted_sum, build_stretched_grid, build_uniform_grid
from .integrator import advance, compute_stage_count, stability_factor
from .mapio import encode_sdm, gen_harmonic, gen_noise
from .operator import StencilOperator, build_operator

OperatorHook = Callable[[StencilOperator], None]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: object
    expected: str
    seconds: float = 0.0
    skipped: bool = False
    detail: str = ""

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        text = f"[{status}] {self.name}: measured {self.measured} (expected {self.expected}) [{self.seconds:.2f}s]"
        if self.detail:
            text += f" -- {self.detail}"
        return text


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - t0
        return result
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _decay_errors(nt: int, nph: int, total_time: float, steps: int,
                  exec: Optional[ExecPlan] = None) -> Tuple[float, float]:
    """(max pointwise relative error of u/u0, decay-rate error) for the l=2, m=2 harmonic."""
    grid = build_uniform_grid(nt, nph)
    op = build_operator(grid, 1.0)
    u0 = gen_harmonic(grid, 2, 2)
    u, _ = advance(op, u0, total_time, steps, exec)
    a0 = np.abs(u0.values)
    mask = a0 > 0.1 * a0.max()
    ratio = u.values[mask] / u0.values[mask]
    exact = math.exp(-6.0 * total_time)
    pointwise = float(np.max(np.abs(ratio / exact - 1.0)))
    rate = float(np.mean(-np.log(ratio))) / total_time
    return pointwise, abs(rate - 6.0)


@_timed
def check_harmonic_decay(nt: int = 181, nph: int = 360, total_time: float = 0.01, steps: int = 10,
                         rtol: float = 2e-3, time_budget: Optional[float] = 10.0,
                         exec: Optional[ExecPlan] = None) -> CheckResult:
    """u/u0 for the l=2, m=2 harmonic must match exp(-6 t) where |u0| > 0.1 max."""
    t0 = time.perf_counter()
    err, _ = _decay_errors(nt, nph, total_time, steps, exec)
    elapsed = time.perf_counter() - t0
    ok = err <= rtol and (time_budget is None or elapsed < time_budget)
    budget = "" if time_budget is None else f", runtime < {time_budget:g}s"
    return CheckResult(f"harmonic decay {nt}x{nph}", ok, f"{err:.3e} rel, {elapsed:.2f}s",
                       f"<= {rtol:g}{budget}")


@_timed
def check_spatial_convergence(coarse: Tuple[int, int] = (91, 180), fine: Tuple[int, int] = (181, 360),
                              total_time: float = 0.01, steps: int = 10,
                              bounds: Tuple[float, float] = (3.2, 4.8)) -> CheckResult:
    """Decay-rate error must shrink ~4x when the grid spacing halves."""
    _, e_coarse = _decay_errors(*coarse, total_time, steps)
    _, e_fine = _decay_errors(*fine, total_time, steps)
    factor = e_coarse / e_fine if e_fine > 0 else math.inf
    ok = bounds[0] <= factor <= bounds[1]
    return CheckResult(f"spatial convergence {coarse[0]}x{coarse[1]} -> {fine[0]}x{fine[1]}", ok,
                       f"factor {factor:.3f} (errors {e_coarse:.3e} -> {e_fine:.3e})",
                       f"in [{bounds[0]}, {bounds[1]}]")


@_timed
def check_conservation(nt: int = 257, nph: int = 512, stretch: float = 0.5, steps: int = 100,
                       total_time: float = 1e-3, tol: float = 1e-11, threads: int = 2,
                       seed: int = 2024, operator_hook: Optional[OperatorHook] = None) -> CheckResult:
    """Area-weighted total must not drift, in every execution mode.

    ``operator_hook`` is a fault-injection point for tests: it may tamper
    with the operator before the runs.
    """
    grid = build_stretched_grid(nt, nph, stretch)
    op = build_operator(grid, 1.0)
    if operator_hook is not None:
        operator_hook(op)
    u0 = gen_noise(grid, seed, 1.0)
    scale = area_weighted_sum(grid, np.abs(u0.values))
    before = area_weighted_sum(grid, u0)
    worst = 0.0
    for mode in ExecutionMode:
        with ExecPlan(mode, threads) as plan:
            u, _ = advance(op, u0, total_time, steps, plan)
        worst = max(worst, abs(area_weighted_sum(grid, u) - before) / scale)
    return CheckResult(f"conservation {nt}x{nph} stretched, {steps} steps, all modes", worst <= tol,
                       f"{worst:.3e} rel", f"<= {tol:g}")


@_timed
def check_oracle_equivalence(nt: int = 6, nph: int = 8, stretch: float = 0.5, steps: int = 5,
                             total_time: float = 1.0, tol: float = 1e-13, seed: int = 5) -> CheckResult:
    """Stencil RKL2 path vs the dense-matrix recurrence from the testkit."""
    grid = build_stretched_grid(nt, nph, stretch)
    op = build_operator(grid, 1.0)
    dense = testkit.dense_assemble(grid, 1.0)
    u0 = gen_noise(grid, seed, 1.0)
    u, stats = advance(op, u0, total_time, steps)
    ref = testkit.dense_rkl2_advance(dense, u0.values, stats.stage_counts[0], stats.dt, steps)
    scale = float(np.max(np.abs(u.values)))
    diff = float(np.max(np.abs(u.values - ref)))
    return CheckResult(f"oracle equivalence {nt}x{nph} stretched, {steps} steps (s={stats.stage_counts[0]})",
                       diff <= tol * scale, f"{diff / scale:.3e} rel", f"<= {tol:g}")


@_timed
def check_determinism(nt: int = 129, nph: int = 256, steps: int = 10, total_time: float = 1e-3,
                      thread_counts: Sequence[int] = (1, 2, 8), reduce_tol: float = 1e-12,
                      seed: int = 77) -> CheckResult:
    """parallel-loops output maps equal serial bitwise; parallel-all differs only in reductions."""
    grid = build_stretched_grid(nt, nph, 0.3)
    op = build_operator(grid, 1.0)
    u0 = gen_noise(grid, seed, 1.0)
    with ExecPlan(ExecutionMode.SERIAL) as plan:
        ref, ref_stats = advance(op, u0, total_time, steps, plan)
    ref_bytes = encode_sdm(grid, ref)
    # reductions are compared relative to sum |u| * area, the scale a reassociated sum is accurate to
    scale_0 = area_weighted_sum(grid, np.abs(u0.values))
    scale_f = area_weighted_sum(grid, np.abs(ref.values))
    problems = []
    worst_reduce = 0.0
    for mode in (ExecutionMode.PARALLEL_LOOPS, ExecutionMode.PARALLEL_ALL):
        for t in thread_counts:
            with ExecPlan(mode, t) as plan:
                u, stats = advance(op, u0, total_time, steps, plan)
                reduced = plan.reduce(u.values * grid.area)
            if encode_sdm(grid, u) != ref_bytes:
                problems.append(f"{mode.value} threads={t} map differs")
            for a, b, scale in ((stats.mass_initial, ref_stats.mass_initial, scale_0),
                                (stats.mass_final, ref_stats.mass_final, scale_f),
                                (reduced, ref_stats.mass_final, scale_f)):
                rel = abs(a - b) / scale
                if mode is ExecutionMode.PARALLEL_LOOPS and a != b:
                    problems.append(f"parallel-loops threads={t} reduction not bitwise")
                worst_reduce = max(worst_reduce, rel)
    ok = not problems and worst_reduce <= reduce_tol
    return CheckResult(f"determinism matrix threads {tuple(thread_counts)}", ok,
                       "bitwise maps" if not problems else "; ".join(problems[:3]),
                       f"bitwise maps, reductions <= {reduce_tol:g} rel",
                       detail=f"worst reduction difference {worst_reduce:.3e}")


@_timed
def check_stage_counts(ratios: Sequence[float] = (1, 1.5, 2, 10, 25, 100, 1000)) -> CheckResult:
    """compute_stage_count against a linear scan for the smallest admissible s."""
    bad = []
    dt_expl = 1.0
    for r in ratios:
        s_scan = 2
        while stability_factor(s_scan) < r:
            s_scan += 1
        s = compute_stage_count(r * dt_expl, dt_expl)
        if s != s_scan:
            bad.append(f"ratio {r}: {s} != {s_scan}")
    return CheckResult("stage count vs linear scan", not bad, "; ".join(bad) or "all equal",
                       f"matches for ratios {list(ratios)}")


def _synthetic_workload(point, config, workdir):
    pass


@_timed
def check_bench_statistics(seed: int = 11) -> CheckResult:
    """Default repetition count is 10 and CSV summaries re-derive from the per-rep rows."""
    rng = np.random.default_rng(seed)
    ticks = iter(np.cumsum(rng.uniform(0.01, 2.0, 1000)).tolist())
    cpu_ticks = iter(np.cumsum(rng.uniform(0.01, 4.0, 1000)).tolist())
    cfg = BenchmarkConfig(grids=[(9, 16), (17, 32)], modes=["serial", "parallel-loops"],
                          threads=[2], warmup=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # thread count vs cores is irrelevant here
        report = run_benchmark(cfg, workload=_synthetic_workload, wall_clock=lambda: next(ticks),
                               cpu_clock=lambda: next(cpu_ticks))
    reps, summary = parse_csv(emit_csv(report))
    worst = 0.0
    counts_ok = cfg.repetitions == DEFAULT_REPETITIONS == 10
    for row in summary:
        key = (row["mode"], row["nt"], row["np"], row["threads"])
        real = [float(r["real_s"]) for r in reps if (r["mode"], r["nt"], r["np"], r["threads"]) == key]
        cpu = [float(r["cpu_s"]) for r in reps if (r["mode"], r["nt"], r["np"], r["threads"]) == key]
        counts_ok = counts_ok and len(real) == cfg.repetitions
        mean = sum(real) / len(real)
        std = math.sqrt(sum((x - mean) ** 2 for x in real) / (len(real) - 1))
        mean_cpu = sum(cpu) / len(cpu)
        worst = max(worst, abs(mean - float(row["mean_real_s"])), abs(std - float(row["std_real_s"])),
                    abs(mean_cpu - float(row["mean_cpu_s"])))
    serial_speedups = [float(r["speedup"]) for r in summary if r["mode"] == "serial"]
    ok = counts_ok and worst <= 1e-12 and all(s == 1.0 for s in serial_speedups)
    return CheckResult("benchmark statistics from per-rep rows", ok,
                       f"default reps {cfg.repetitions}, max deviation {worst:.1e}",
                       "10 reps, deviation <= 1e-12, serial speedup 1.0")


@_timed
def check_parallel_speedup(nt: int = 2048, nph: int = 4096, steps: int = 20, total_time: float = 1e-9,
                           min_speedup: float = 2.0, min_cores: int = 8, threads: Optional[int] = None,
                           repetitions: int = DEFAULT_REPETITIONS) -> CheckResult:
    """parallel-loops must beat serial by min_speedup on a machine with enough cores."""
    cores = os.cpu_count() or 1
    name = f"parallel-loops speedup {nt}x{nph}, {steps} super-steps"
    if cores < min_cores:
        return CheckResult(name, True, f"{cores} logical cores", f">= {min_cores} cores to run",
                           skipped=True, detail="criterion applies only to machines with enough cores")
    t = threads or cores
    cfg = BenchmarkConfig(grids=[(nt, nph)], modes=["serial", "parallel-loops"], threads=[t],
                          repetitions=repetitions, steps=steps, total_time=total_time)
    report = run_benchmark(cfg)
    point = report.lookup("parallel-loops", nt, nph, t)
    if point is None or point.failed or not report.ok:
        return CheckResult(name, False, "benchmark point failed", f">= {min_speedup}x")
    return CheckResult(name, point.speedup >= min_speedup, f"{point.speedup:.2f}x with {t} threads",
                       f">= {min_speedup}x")


@_timed
def check_operator_accounting(cases: Sequence[Tuple[int, int, float, int]] = (
        (9, 16, 0.05, 3), (17, 32, 0.01, 7), (33, 64, 1e-3, 4), (17, 32, 0.0, 0))) -> CheckResult:
    """total_operator_applications == sum(s_k + 1); measured sweeps == sum(s_k)."""
    bad = []
    for nt, nph, total_time, steps in cases:
        grid = build_uniform_grid(nt, nph)
        op = build_operator(grid, 1.0)
        _, stats = advance(op, gen_noise(grid, nt, 1.0), total_time, steps)
        expected = sum(s + 1 for s in stats.stage_counts)
        if len(stats.stage_counts) != steps and total_time > 0:
            bad.append(f"{nt}x{nph}: {len(stats.stage_counts)} stage counts for {steps} steps")
        if stats.total_operator_applications != expected:
            bad.append(f"{nt}x{nph}: {stats.total_operator_applications} != {expected}")
        if stats.stencil_sweeps != sum(stats.stage_counts):
            bad.append(f"{nt}x{nph}: measured sweeps {stats.stencil_sweeps} != {sum(stats.stage_counts)}")
    return CheckResult("operator-application accounting", not bad, "; ".join(bad) or "exact",
                       "sum(s_k + 1) per run")


def run_checks(level: str = "fast", threads: int = 2) -> List[CheckResult]:
    """Run the check suite.  ``fast`` stays well under a minute on a desktop."""
    if level == "fast":
        return [
            check_harmonic_decay(91, 180),
            check_spatial_convergence((46, 90), (91, 180)),
            check_conservation(65, 128, steps=30, threads=threads),
            check_oracle_equivalence(),
            check_determinism(65, 128, steps=5),
            check_stage_counts(),
            check_bench_statistics(),
            check_operator_accounting(),
        ]
    if level == "full":
        return [
            check_harmonic_decay(),
            check_spatial_convergence(),
            check_conservation(threads=threads),
            check_oracle_equivalence(),
            check_determinism(),
            check_stage_counts(),
            check_bench_statistics(),
            check_parallel_speedup(),
            check_operator_accounting(),
        ]
    raise ValueError(f"unknown validation level {level!r}")
