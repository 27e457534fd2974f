import time

from diffuse.cli import main
from diffuse.validate import CheckResult, check_conservation, run_checks


def test_fast_level_passes_quickly():
    t0 = time.perf_counter()
    results = run_checks("fast", threads=2)
    assert time.perf_counter() - t0 < 60
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]


def test_tampered_coefficient_fails_conservation():
    def tamper(op):
        op.c_east[10, 5] *= 1.01

    r = check_conservation(33, 64, steps=5, operator_hook=tamper)
    assert not r.passed and "FAIL" in r.line()
    assert check_conservation(33, 64, steps=5).passed


def test_line_format():
    assert CheckResult("x", True, 1, "<= 2").line().startswith("[PASS] x")
    assert CheckResult("x", False, 3, "<= 2").line().startswith("[FAIL] x")
    assert CheckResult("x", True, 0, "8 cores", skipped=True).line().startswith("[SKIP] x")


def test_cli_validate_exit_codes(capsys, monkeypatch):
    assert main(["validate", "--level", "fast", "--threads", "2"]) == 0
    out = capsys.readouterr().out
    assert "8/8 checks passed" in out

    import diffuse.validate as v
    monkeypatch.setattr(v, "run_checks", lambda level, threads: [CheckResult("bad", False, 1, "0")])
    assert main(["validate"]) == 1
