import warnings

import pytest

from diffuse import InvalidArgumentError, MapFormatError
from diffuse.bench import (DEFAULT_REPETITIONS, BenchmarkConfig, BenchmarkReport, REP_COLUMNS, SUMMARY_COLUMNS,
                           emit_csv, emit_table, parse_csv, parse_grid_spec, run_benchmark)


def _noop(point, config, workdir):
    pass


def _clock(values):
    it = iter(values)
    return lambda: next(it)


def _quiet_run(cfg, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_benchmark(cfg, workload=kw.pop("workload", _noop), **kw)


def test_mean_and_sample_std_from_injected_clock():
    cfg = BenchmarkConfig(grids=[(5, 8)], repetitions=3, warmup=0)
    # start/stop pairs giving durations 1, 2, 3
    report = _quiet_run(cfg, wall_clock=_clock([0, 1, 10, 12, 20, 23]), cpu_clock=_clock([0] * 6))
    r = report.results[0]
    assert r.real_s == [1, 2, 3]
    assert r.mean_real == 2.0 and r.std_real == 1.0
    assert r.speedup == 1.0


def test_equal_timings_have_zero_std():
    cfg = BenchmarkConfig(grids=[(5, 8)], repetitions=4, warmup=0)
    report = _quiet_run(cfg, wall_clock=_clock([0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5]),
                        cpu_clock=_clock([0] * 8))
    assert report.results[0].std_real == 0.0


def test_single_rep_std_is_zero():
    cfg = BenchmarkConfig(grids=[(5, 8)], repetitions=1, warmup=0)
    assert _quiet_run(cfg).results[0].std_real == 0.0


def test_empty_report_csv_has_headers_only():
    reps, summary = parse_csv(emit_csv(None))
    assert reps == [] and summary == []
    text = emit_csv(BenchmarkReport(BenchmarkConfig()))
    assert text.splitlines() == [",".join(REP_COLUMNS), "", ",".join(SUMMARY_COLUMNS)]


def test_default_repetitions_is_ten():
    assert DEFAULT_REPETITIONS == 10 == BenchmarkConfig().repetitions


def test_speedup_relative_to_serial():
    cfg = BenchmarkConfig(grids=[(5, 8)], modes=["serial", "parallel-loops"], threads=[2],
                          repetitions=2, warmup=0)
    wall = _clock([0, 4, 4, 8, 8, 10, 10, 12])  # serial 4s per rep, parallel 2s per rep
    report = _quiet_run(cfg, wall_clock=wall, cpu_clock=_clock([0] * 8))
    assert report.lookup("serial", 5, 8, 1).speedup == 1.0
    assert report.lookup("parallel-loops", 5, 8, 2).speedup == 2.0


def test_failed_point_is_reported_not_fatal():
    def workload(point, config, workdir):
        if point.nt == 9:
            raise MemoryError("too big")

    cfg = BenchmarkConfig(grids=[(9, 16), (5, 8)], repetitions=2, warmup=1)
    report = _quiet_run(cfg, workload=workload)
    assert not report.ok and len(report.failed) == 1
    assert "MemoryError" in report.failed[0].error
    assert report.lookup("serial", 5, 8, 1).real_s
    reps, summary = parse_csv(emit_csv(report))
    assert {r["nt"] for r in reps} == {"5"} and len(summary) == 1
    assert "FAILED" in emit_table(report)


def test_package_error_marks_failure():
    def workload(point, config, workdir):
        raise MapFormatError("bad")

    report = _quiet_run(BenchmarkConfig(grids=[(5, 8)], repetitions=1), workload=workload)
    assert report.failed


def test_summary_recomputable_from_rows():
    import statistics
    cfg = BenchmarkConfig(grids=[(5, 8), (9, 16)], modes=["serial", "parallel-all"], threads=[1, 2],
                          repetitions=5, warmup=0)
    ticks = iter([0.1 * k * k for k in range(1000)])
    report = _quiet_run(cfg, wall_clock=lambda: next(ticks), cpu_clock=lambda: 0.0)
    reps, summary = parse_csv(emit_csv(report))
    assert len(summary) == 6
    for row in summary:
        key = (row["mode"], row["nt"], row["np"], row["threads"])
        xs = [float(r["real_s"]) for r in reps if (r["mode"], r["nt"], r["np"], r["threads"]) == key]
        assert len(xs) == 5
        assert float(row["mean_real_s"]) == pytest.approx(statistics.fmean(xs), rel=1e-15)
        assert float(row["std_real_s"]) == pytest.approx(statistics.stdev(xs), rel=1e-15)


def test_oversubscription_warns(monkeypatch):
    monkeypatch.setattr("os.cpu_count", lambda: 2)
    cfg = BenchmarkConfig(grids=[(5, 8)], modes=["serial", "parallel-loops"], threads=[4], repetitions=1)
    with pytest.warns(RuntimeWarning, match="exceed"):
        run_benchmark(cfg, workload=_noop)


def test_real_workload_runs(tmp_path):
    cfg = BenchmarkConfig(grids=[(9, 16)], modes=["serial", "parallel-loops"], threads=[1],
                          repetitions=2, steps=2, total_time=1e-3)
    report = run_benchmark(cfg, workdir=str(tmp_path))
    assert report.ok and all(len(r.real_s) == 2 for r in report.results)
    assert (tmp_path / "bench_9x16.sdm").exists()


def test_config_validation():
    for kw in ({"repetitions": 0}, {"warmup": -1}, {"modes": []}, {"grids": []}, {"threads": [0]},
               {"steps": 0}, {"modes": ["parallel-all"]}):
        with pytest.raises(InvalidArgumentError):
            BenchmarkConfig(**kw).validate()


def test_parse_grid_spec():
    assert parse_grid_spec("512x1024") == (512, 1024)
    assert parse_grid_spec("3X4") == (3, 4)
    with pytest.raises(InvalidArgumentError):
        parse_grid_spec("512")
