"""Acceptance criteria, one test per criterion at the stated scale and tolerance.

Each test records a PASS/FAIL/SKIP line, printed at the end of the session.
"""

import numpy as np
import pytest

from diffuse import advance, build_operator, build_stretched_grid, build_uniform_grid, gen_noise
from diffuse.validate import (check_bench_statistics, check_conservation, check_determinism,
                              check_harmonic_decay, check_operator_accounting, check_oracle_equivalence,
                              check_parallel_speedup, check_spatial_convergence, check_stage_counts)


def _record(log, number, result):
    line = f"criterion {number}: " + result.line()
    log.append(line)
    print(line)
    if result.skipped:
        pytest.skip(line)
    assert result.passed, line


def test_criterion_1_harmonic_decay(acceptance_log):
    _record(acceptance_log, 1, check_harmonic_decay(181, 360, total_time=0.01, steps=10, rtol=2e-3,
                                                    time_budget=10.0))


def test_criterion_2_spatial_convergence(acceptance_log):
    _record(acceptance_log, 2, check_spatial_convergence((91, 180), (181, 360), bounds=(3.2, 4.8)))


def test_criterion_3_conservation(acceptance_log):
    _record(acceptance_log, 3, check_conservation(257, 512, stretch=0.5, steps=100, tol=1e-11, threads=4))


def test_criterion_4_oracle_equivalence(acceptance_log):
    _record(acceptance_log, 4, check_oracle_equivalence(6, 8, stretch=0.5, steps=5, tol=1e-13))


def test_criterion_5_determinism(acceptance_log):
    _record(acceptance_log, 5, check_determinism(thread_counts=(1, 2, 8), reduce_tol=1e-12))


def test_criterion_6_stage_counts(acceptance_log):
    _record(acceptance_log, 6, check_stage_counts((1, 1.5, 2, 10, 25, 100, 1000)))


def test_criterion_7_benchmark_methodology(acceptance_log):
    _record(acceptance_log, "7a", check_bench_statistics())


def test_criterion_7_parallel_speedup(acceptance_log):
    _record(acceptance_log, "7b", check_parallel_speedup(2048, 4096, steps=20, min_speedup=2.0, min_cores=8))


def test_criterion_8_operator_accounting(acceptance_log):
    result = check_operator_accounting()
    # also cover the runs of the other criteria: stretched grids and every mode
    for nt, nph, stretch, total_time, steps in ((6, 8, 0.5, 1.0, 5), (65, 128, 0.5, 1e-3, 12)):
        grid = build_stretched_grid(nt, nph, stretch)
        _, stats = advance(build_operator(grid), gen_noise(grid, 1), total_time, steps)
        if stats.total_operator_applications != sum(s + 1 for s in stats.stage_counts):
            result.passed = False
    _record(acceptance_log, 8, result)
