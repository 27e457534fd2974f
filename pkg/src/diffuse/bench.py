"""Timing harness: repeated full runs, wall and CPU clocks, mean/stddev, speedup.

Each timed repetition covers a complete smoothing run the way a user would
launch it: build the grid, generate the input map, build the operator,
advance, and write the output map to disk.  One untimed warmup run per
configuration point comes first (JIT compilation, page faults).
"""

from __future__ import annotations

import csv
import io
import logging
import os
import statistics
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from .errors import DiffuseError, InvalidArgumentError
from .execution import ExecPlan, ExecutionMode
from .grid import build_stretched_grid
from .integrator import advance
from .mapio import gen_noise, write_map
from .operator import build_operator

log = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 10

REP_COLUMNS = ["mode", "nt", "np", "threads", "rep", "real_s", "cpu_s"]
SUMMARY_COLUMNS = ["mode", "nt", "np", "threads", "mean_real_s", "std_real_s", "mean_cpu_s", "speedup"]


@dataclass
class BenchmarkConfig:
    grids: List[Tuple[int, int]] = field(default_factory=lambda: [(256, 512)])
    modes: List[ExecutionMode] = field(default_factory=lambda: [ExecutionMode.SERIAL])
    threads: List[int] = field(default_factory=lambda: [1])
    repetitions: int = DEFAULT_REPETITIONS
    warmup: int = 1
    steps: int = 20
    total_time: float = 1e-4
    nu: float = 1.0
    seed: int = 0
    stretch: float = 0.0
    speedup: bool = True

    def __post_init__(self):
        self.modes = [ExecutionMode.parse(m) for m in self.modes]
        self.grids = [(int(a), int(b)) for a, b in self.grids]
        self.threads = [int(t) for t in self.threads]

    def validate(self) -> None:
        if self.repetitions < 1:
            raise InvalidArgumentError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.warmup < 0:
            raise InvalidArgumentError(f"warmup must be >= 0, got {self.warmup}")
        if not self.modes:
            raise InvalidArgumentError("at least one execution mode is required")
        if not self.grids:
            raise InvalidArgumentError("at least one grid size is required")
        if not self.threads or any(t < 1 for t in self.threads):
            raise InvalidArgumentError("thread counts must be >= 1")
        if self.steps < 1:
            raise InvalidArgumentError(f"steps must be >= 1, got {self.steps}")
        if self.speedup and ExecutionMode.SERIAL not in self.modes:
            raise InvalidArgumentError("speedup needs the serial baseline among the modes")

    def points(self) -> List["ConfigPoint"]:
        pts = []
        for nt, nph in self.grids:
            for mode in self.modes:
                counts = [1] if mode is ExecutionMode.SERIAL else self.threads
                for t in counts:
                    pts.append(ConfigPoint(mode, nt, nph, t))
        return pts


@dataclass(frozen=True)
class ConfigPoint:
    mode: ExecutionMode
    nt: int
    np: int
    threads: int


@dataclass
class PointResult:
    point: ConfigPoint
    real_s: List[float] = field(default_factory=list)
    cpu_s: List[float] = field(default_factory=list)
    error: Optional[str] = None
    speedup: Optional[float] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def mean_real(self) -> float:
        return statistics.fmean(self.real_s)

    @property
    def std_real(self) -> float:
        return statistics.stdev(self.real_s) if len(self.real_s) > 1 else 0.0

    @property
    def mean_cpu(self) -> float:
        return statistics.fmean(self.cpu_s)


@dataclass
class BenchmarkReport:
    config: BenchmarkConfig
    results: List[PointResult] = field(default_factory=list)

    @property
    def failed(self) -> List[PointResult]:
        return [r for r in self.results if r.failed]

    @property
    def ok(self) -> bool:
        return not self.failed

    def lookup(self, mode, nt: int, nph: int, threads: int) -> Optional[PointResult]:
        mode = ExecutionMode.parse(mode)
        for r in self.results:
            p = r.point
            if (p.mode, p.nt, p.np, p.threads) == (mode, nt, nph, threads):
                return r
        return None


Workload = Callable[[ConfigPoint, BenchmarkConfig, str], None]


def smoothing_run(point: ConfigPoint, config: BenchmarkConfig, workdir: str) -> None:
    """One full run: grid, input map, operator, advance, output file."""
    grid = build_stretched_grid(point.nt, point.np, config.stretch)
    u0 = gen_noise(grid, config.seed, 1.0)
    op = build_operator(grid, config.nu)
    with ExecPlan(point.mode, point.threads) as plan:
        u, _ = advance(op, u0, config.total_time, config.steps, plan)
    write_map(os.path.join(workdir, f"bench_{point.nt}x{point.np}.sdm"), grid, u)


def _attach_speedups(report: BenchmarkReport) -> None:
    for r in report.results:
        if r.failed or not report.config.speedup:
            continue
        base = report.lookup(ExecutionMode.SERIAL, r.point.nt, r.point.np, 1)
        if base is None or base.failed:
            continue
        r.speedup = 1.0 if base is r else base.mean_real / r.mean_real


def run_benchmark(config: BenchmarkConfig, workload: Workload = smoothing_run,
                  wall_clock: Callable[[], float] = time.perf_counter,
                  cpu_clock: Callable[[], float] = time.process_time,
                  workdir: Optional[str] = None) -> BenchmarkReport:
    """Time every configuration point ``config.repetitions`` times.

    ``wall_clock`` must be monotonic.  A point whose run raises MemoryError or
    a package error is marked failed; the remaining points still run.
    """
    config.validate()
    cores = os.cpu_count() or 1
    too_many = [t for t in config.threads if t > cores]
    if too_many:
        warnings.warn(f"requested thread counts {too_many} exceed the {cores} logical cores available",
                      RuntimeWarning, stacklevel=2)

    report = BenchmarkReport(config=config)
    with tempfile.TemporaryDirectory(prefix="diffuse-bench-") as tmp:
        wd = workdir or tmp
        for point in config.points():
            result = PointResult(point)
            report.results.append(result)
            try:
                for _ in range(config.warmup):
                    workload(point, config, wd)
                for rep in range(config.repetitions):
                    c0, t0 = cpu_clock(), wall_clock()
                    workload(point, config, wd)
                    t1, c1 = wall_clock(), cpu_clock()
                    result.real_s.append(t1 - t0)
                    result.cpu_s.append(c1 - c0)
                    log.debug("%s %dx%d t=%d rep %d: %.4fs", point.mode.value, point.nt, point.np,
                              point.threads, rep, t1 - t0)
            except (MemoryError, DiffuseError) as exc:
                result.error = f"{type(exc).__name__}: {exc}"
                result.real_s.clear()
                result.cpu_s.clear()
                log.warning("benchmark point %s failed: %s", point, result.error)
    _attach_speedups(report)
    return report


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def emit_csv(report: Optional[BenchmarkReport]) -> str:
    """Per-repetition rows, a blank line, then one summary row per point.

    Failed points are left out of both sections; they show up in the table.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REP_COLUMNS)
    good = [r for r in (report.results if report else []) if not r.failed]
    for r in good:
        p = r.point
        for k, (real, cpu) in enumerate(zip(r.real_s, r.cpu_s)):
            w.writerow([p.mode.value, p.nt, p.np, p.threads, k, _fmt(real), _fmt(cpu)])
    buf.write("\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in good:
        p = r.point
        w.writerow([p.mode.value, p.nt, p.np, p.threads, _fmt(r.mean_real), _fmt(r.std_real),
                    _fmt(r.mean_cpu), _fmt(r.speedup)])
    return buf.getvalue()


def parse_csv(text: str) -> Tuple[List[dict], List[dict]]:
    """Split emitted CSV back into (rep rows, summary rows) as dicts of strings."""
    head, _, tail = text.partition("\n\n")
    reps = list(csv.DictReader(io.StringIO(head)))
    summary = list(csv.DictReader(io.StringIO(tail)))
    return reps, summary


def emit_table(report: BenchmarkReport) -> str:
    lines = [
        "| mode | nt | np | threads | reps | mean real (s) | std real (s) | mean cpu (s) | speedup |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for r in report.results:
        p = r.point
        if r.failed:
            lines.append(f"| {p.mode.value} | {p.nt} | {p.np} | {p.threads} | 0 | FAILED | | | |")
            continue
        sp = "" if r.speedup is None else f"{r.speedup:.2f}"
        lines.append(f"| {p.mode.value} | {p.nt} | {p.np} | {p.threads} | {len(r.real_s)} | "
                     f"{r.mean_real:.4f} | {r.std_real:.4f} | {r.mean_cpu:.4f} | {sp} |")
    return "\n".join(lines) + "\n"


def parse_grid_spec(text: str) -> Tuple[int, int]:
    """'512x1024' -> (512, 1024)."""
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise InvalidArgumentError(f"grid size must look like NTxNP, got {text!r}") from None
