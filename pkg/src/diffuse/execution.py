"""Execution modes: serial, parallel loops with ordered reductions, fully parallel.

The three modes map onto the code versions of the original Fortran study:

* ``serial``          single-threaded reference (the *Serial* build)
* ``parallel-loops``  grid sweeps in parallel, reductions strictly ordered
                      (the *New* version: directives kept only on reductions)
* ``parallel-all``    sweeps and reductions in parallel (the *Experimental*
                      version, with the reduction given proper reduction
                      semantics instead of racing on a shared accumulator)

There is deliberately no mode that parallelizes a reduction loop without a
combining tree.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import ConfigurationError, InvalidArgumentError

ENV_THREADS = "DIFFUSE_NUM_THREADS"

RowKernel = Callable[[int, int], None]


class ExecutionMode(str, Enum):
    SERIAL = "serial"
    PARALLEL_LOOPS = "parallel-loops"
    PARALLEL_ALL = "parallel-all"

    @classmethod
    def parse(cls, name: Union[str, "ExecutionMode"]) -> "ExecutionMode":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == key:
                return mode
        choices = ", ".join(m.value for m in cls)
        raise InvalidArgumentError(f"unknown execution mode {name!r} (choose from {choices})")


class ReductionMode(str, Enum):
    ORDERED = "ordered"
    PARALLEL = "parallel"


def default_chunk(n_rows: int, threads: int) -> int:
    """Rows per task: ceil(n_rows / (4 * threads)), at least 1."""
    return max(1, math.ceil(n_rows / (4 * threads)))


class ExecPlan:
    """How grid sweeps and reductions are executed.

    Parameters
    ----------
    mode : ExecutionMode or str
    threads : int
        Worker count.  Forced to 1 for ``serial``.
    chunking : int, optional
        Rows per task.  Defaults to ``default_chunk(n_rows, threads)`` for
        each sweep.

    The worker pool is created lazily and shut down by ``close()`` or on
    leaving a ``with`` block.
    """

    def __init__(self, mode: Union[ExecutionMode, str] = ExecutionMode.SERIAL,
                 threads: int = 1, chunking: Optional[int] = None):
        self.mode = ExecutionMode.parse(mode)
        if isinstance(threads, bool) or not isinstance(threads, (int, np.integer)) or threads < 1:
            raise InvalidArgumentError(f"threads must be an integer >= 1, got {threads!r}")
        if chunking is not None and (not isinstance(chunking, (int, np.integer)) or chunking < 1):
            raise InvalidArgumentError(f"chunking must be an integer >= 1, got {chunking!r}")
        self.threads = 1 if self.mode is ExecutionMode.SERIAL else int(threads)
        self.chunking = None if chunking is None else int(chunking)
        self._pool: Optional[ThreadPoolExecutor] = None

    def __repr__(self) -> str:
        return f"ExecPlan(mode={self.mode.value!r}, threads={self.threads}, chunking={self.chunking})"

    @property
    def reduction_mode(self) -> ReductionMode:
        if self.mode is ExecutionMode.PARALLEL_ALL:
            return ReductionMode.PARALLEL
        return ReductionMode.ORDERED

    @property
    def is_parallel(self) -> bool:
        return self.mode is not ExecutionMode.SERIAL

    def rows_per_task(self, n_rows: int) -> int:
        return self.chunking if self.chunking is not None else default_chunk(n_rows, self.threads)

    def _executor(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads,
                                            thread_name_prefix="diffuse")
        return self._pool

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "ExecPlan":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        pool = getattr(self, "_pool", None)
        if pool is not None:
            pool.shutdown(wait=False)

    def parallel_sweep(self, rows: Union[range, int], kernel: RowKernel) -> None:
        """Run ``kernel(start, stop)`` over row blocks covering ``rows``.

        ``kernel`` must write only rows ``[start, stop)`` of its output and
        must not mutate its inputs.  Every row is covered exactly once.
        """
        if isinstance(rows, int):
            rows = range(rows)
        if rows.step != 1:
            raise InvalidArgumentError("row range must be contiguous")
        start, stop = rows.start, rows.stop
        if stop <= start:
            return
        if not self.is_parallel:
            kernel(start, stop)
            return
        chunk = self.rows_per_task(stop - start)
        bounds = [(lo, min(lo + chunk, stop)) for lo in range(start, stop, chunk)]
        if len(bounds) == 1:
            kernel(start, stop)
            return
        pool = self._executor()
        futures = [pool.submit(kernel, lo, hi) for lo, hi in bounds]
        for fut in futures:
            fut.result()

    def reduce(self, values) -> float:
        return reduce_values(values, self.reduction_mode, threads=self.threads,
                             executor=self._executor() if self.reduction_mode is ReductionMode.PARALLEL
                             and self.threads > 1 else None)


def _tree_combine(partials: Sequence[float]) -> float:
    # fan-in 2 over adjacent partials; an odd tail is carried up unchanged
    level = list(partials)
    while len(level) > 1:
        nxt = [level[k] + level[k + 1] for k in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def reduce_values(values, mode: ReductionMode = ReductionMode.ORDERED, threads: int = 1,
                  block_size: Optional[int] = None, executor=None) -> float:
    """Sum ``values`` according to ``mode``.

    ``ORDERED`` is the strict left-to-right sum.  ``PARALLEL`` sums contiguous
    blocks independently (concurrently if an executor is given) and combines
    the partial sums with a pairwise tree.  For a fixed thread count and block
    size the parallel result is reproducible, but it is reassociated relative
    to the ordered one.
    """
    arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
    n = arr.shape[0]
    if n == 0:
        return 0.0
    mode = ReductionMode(mode)
    if mode is ReductionMode.ORDERED:
        return float(kernels.ordered_sum(arr))
    if block_size is None:
        block_size = max(1, math.ceil(n / (4 * max(1, threads))))
    blocks = [arr[lo:lo + block_size] for lo in range(0, n, block_size)]
    if executor is not None and len(blocks) > 1:
        partials = list(executor.map(kernels.ordered_sum, blocks))
    else:
        partials = [kernels.ordered_sum(b) for b in blocks]
    return float(_tree_combine(partials))


def parallel_sweep(plan: ExecPlan, rows: Union[range, int], kernel: RowKernel) -> None:
    plan.parallel_sweep(rows, kernel)


def reduce(plan: ExecPlan, values) -> float:
    return plan.reduce(values)


def _parse_count(raw, source: str) -> int:
    if isinstance(raw, bool):
        raise ConfigurationError(f"{source}: expected an integer >= 1, got {raw!r}")
    if isinstance(raw, (int, np.integer)):
        value = int(raw)
    else:
        text = str(raw).strip()
        try:
            value = int(text, 10)
        except ValueError:
            raise ConfigurationError(f"{source}: expected an integer >= 1, got {raw!r}") from None
    if value < 1:
        raise ConfigurationError(f"{source}: expected an integer >= 1, got {raw!r}")
    return value


def resolve_thread_count(cli_threads=None, env_value: Optional[str] = None) -> int:
    """Pick the worker count: CLI flag, then ``DIFFUSE_NUM_THREADS``, then core count.

    An empty or whitespace-only environment value counts as unset.
    """
    if cli_threads is not None:
        return _parse_count(cli_threads, "--threads")
    if env_value is not None and str(env_value).strip():
        return _parse_count(env_value, ENV_THREADS)
    return max(1, os.cpu_count() or 1)
