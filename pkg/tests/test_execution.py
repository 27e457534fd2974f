import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffuse import ConfigurationError, ExecPlan, ExecutionMode, InvalidArgumentError, ReductionMode
from diffuse.execution import default_chunk, parallel_sweep, reduce, reduce_values, resolve_thread_count
from diffuse import kernels


def test_serial_forces_one_thread():
    plan = ExecPlan("serial", threads=8)
    assert plan.threads == 1
    assert plan.reduction_mode is ReductionMode.ORDERED


def test_reduction_mode_per_execution_mode():
    assert ExecPlan("parallel-loops", 4).reduction_mode is ReductionMode.ORDERED
    assert ExecPlan("parallel-all", 4).reduction_mode is ReductionMode.PARALLEL


@pytest.mark.parametrize("bad", [0, -1, 1.5, True])
def test_plan_rejects_bad_threads(bad):
    with pytest.raises(InvalidArgumentError):
        ExecPlan("parallel-loops", bad)


def test_mode_parse():
    assert ExecutionMode.parse("PARALLEL_LOOPS") is ExecutionMode.PARALLEL_LOOPS
    with pytest.raises(InvalidArgumentError):
        ExecutionMode.parse("gpu")


def test_default_chunk():
    assert default_chunk(181, 4) == math.ceil(181 / 16)
    assert default_chunk(3, 8) == 1


@pytest.mark.parametrize("mode", list(ExecutionMode))
@pytest.mark.parametrize("threads,chunk", [(1, None), (3, None), (8, 1), (2, 7)])
def test_sweep_covers_every_row_once(mode, threads, chunk):
    hits = np.zeros(101, dtype=int)
    lock = threading.Lock()

    def kernel(i0, i1):
        with lock:
            hits[i0:i1] += 1

    with ExecPlan(mode, threads, chunk) as plan:
        parallel_sweep(plan, range(101), kernel)
    assert np.all(hits == 1)


def test_sweep_empty_range_is_noop():
    calls = []
    ExecPlan("parallel-loops", 4).parallel_sweep(range(5, 5), lambda a, b: calls.append((a, b)))
    assert calls == []


def test_sweep_propagates_kernel_errors():
    def kernel(i0, i1):
        if i0 > 0:
            raise RuntimeError("boom")

    with ExecPlan("parallel-loops", 2, chunking=1) as plan:
        with pytest.raises(RuntimeError, match="boom"):
            plan.parallel_sweep(range(4), kernel)


def test_combine_kernel_bitwise_across_modes():
    rng = np.random.default_rng(0)
    arrays = [rng.standard_normal((257, 512)) for _ in range(5)]
    y0, yp, ypp, m0, mp = arrays

    def run(plan):
        out = np.empty_like(y0)
        plan.parallel_sweep(range(257), lambda i0, i1: kernels.combine_rows(
            y0, yp, ypp, m0, mp, 1.3, -0.4, 0.01, -0.002, out, i0, i1))
        return out

    ref = run(ExecPlan("serial"))
    for mode in ("parallel-loops", "parallel-all"):
        for t in (1, 2, 8):
            with ExecPlan(mode, t) as plan:
                assert np.array_equal(run(plan), ref)


def test_reduce_empty_and_alternating():
    for mode in ("serial", "parallel-loops", "parallel-all"):
        with ExecPlan(mode, 4) as plan:
            assert reduce(plan, []) == 0.0
            assert reduce(plan, [1.0, -1.0, 1.0, -1.0]) == 0.0


def test_ordered_reduce_is_left_to_right():
    values = np.random.default_rng(4).uniform(-1, 1, 10_000) * 10.0 ** np.random.default_rng(5).integers(-8, 8, 10_000)
    acc = 0.0
    for v in values.tolist():
        acc += v
    assert reduce_values(values, ReductionMode.ORDERED) == acc


def test_parallel_reduce_close_to_ordered_million():
    values = np.random.default_rng(123).uniform(-1.0, 1.0, 1_000_000)
    ordered = reduce_values(values, ReductionMode.ORDERED)
    scale = float(np.sum(np.abs(values)))
    for threads in (1, 2, 8):
        with ExecPlan("parallel-all", threads) as plan:
            assert abs(plan.reduce(values) - ordered) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), max_size=300), st.integers(1, 8), st.integers(1, 50))
def test_parallel_reduce_tolerance_property(values, threads, block):
    arr = np.array(values, dtype=float)
    ordered = reduce_values(arr, ReductionMode.ORDERED)
    par = reduce_values(arr, ReductionMode.PARALLEL, threads=threads, block_size=block)
    assert abs(par - ordered) <= 1e-12 * float(np.sum(np.abs(arr))) + 0.0


def test_parallel_reduce_reproducible_for_fixed_layout():
    values = np.random.default_rng(8).standard_normal(50_000)
    with ExecPlan("parallel-all", 3) as plan:
        first = plan.reduce(values)
        assert all(plan.reduce(values) == first for _ in range(5))


def racy_sum(values, threads):
    """Test-only: parallel accumulation into one shared slot with no reduction semantics.

    A barrier between each read and write forces the interleaving a scheduler
    may produce: every thread reads the same partial sum before any writes back.
    """
    acc = [0.0]
    chunks = np.array_split(np.asarray(values), threads)
    rounds = min(len(c) for c in chunks)
    barrier = threading.Barrier(threads)

    def work(chunk):
        for v in chunk[:rounds].tolist():
            current = acc[0]
            barrier.wait()
            acc[0] = current + v
            barrier.wait()

    workers = [threading.Thread(target=work, args=(c,)) for c in chunks]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    return acc[0]


def test_unsynchronized_reduction_loses_updates():
    # what a compiler parallelizing a reduction loop without reduction support produces
    values = np.ones(4000)
    assert racy_sum(values, 4) == 1000.0  # three of every four updates lost
    assert reduce_values(values, ReductionMode.ORDERED) == 4000.0
    with ExecPlan("parallel-all", 4) as plan:
        assert plan.reduce(values) == 4000.0


def test_resolve_thread_count_precedence(monkeypatch):
    assert resolve_thread_count(4, "8") == 4
    assert resolve_thread_count(None, "8") == 8
    assert resolve_thread_count("3", None) == 3
    monkeypatch.setattr("os.cpu_count", lambda: 6)
    assert resolve_thread_count(None, None) == 6
    assert resolve_thread_count(None, "  ") == 6
    monkeypatch.setattr("os.cpu_count", lambda: None)
    assert resolve_thread_count(None, None) == 1


@pytest.mark.parametrize("cli,env,source", [(None, "0", "DIFFUSE_NUM_THREADS"), (None, "abc", "DIFFUSE_NUM_THREADS"),
                                            (0, "4", "--threads"), ("x", None, "--threads"),
                                            (None, "-2", "DIFFUSE_NUM_THREADS")])
def test_resolve_thread_count_errors_name_source(cli, env, source):
    with pytest.raises(ConfigurationError, match=source):
        resolve_thread_count(cli, env)
