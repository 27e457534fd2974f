import re
import subprocess
import sys

import numpy as np
import pytest

from diffuse import advance, build_operator, build_uniform_grid, read_map, write_map
from diffuse.bench import parse_csv
from diffuse.cli import build_parser, main
from diffuse.mapio import gen_harmonic


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_harmonic_is_cos_theta(tmp_path, capsys):
    out = tmp_path / "h.sdm"
    code, _, _ = run(capsys, "gen", "--type", "harmonic", "--nt", 3, "--np", 4, "--l", 1, "-o", out)
    assert code == 0
    grid, field = read_map(out)
    assert grid.shape == (3, 4)
    np.testing.assert_allclose(field.values, np.cos(grid.theta)[:, None] * np.ones(4), atol=1e-15)


def test_gen_noise_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.sdm", tmp_path / "b.csv"
    c = tmp_path / "c.sdm"
    for path in (a, c):
        assert run(capsys, "gen", "--type", "noise", "--nt", 9, "--np", 16, "--seed", 3, "-o", path)[0] == 0
    assert a.read_bytes() == c.read_bytes()
    assert run(capsys, "gen", "--type", "noise", "--nt", 9, "--np", 16, "--seed", 3, "-o", b)[0] == 0
    assert np.array_equal(read_map(a)[1].values, read_map(b)[1].values)


@pytest.mark.parametrize("argv", [
    ["gen", "--type", "noise", "--nt", "2", "--np", "8", "-o", "x.sdm"],
    ["gen", "--type", "noise", "--nt", "5", "--np", "8", "--l", "2", "-o", "x.sdm"],
    ["gen", "--type", "harmonic", "--nt", "5", "--np", "8", "--seed", "1", "-o", "x.sdm"],
    ["gen", "--type", "harmonic", "--nt", "5", "--np", "8", "-o", "x.sdm"],
    ["gen", "--type", "harmonic", "--nt", "5", "--np", "8", "--l", "1", "--m", "3", "-o", "x.sdm"],
    ["gen", "--bogus"],
    ["smooth", "a.sdm", "b.sdm", "--time", "1", "--steps", "0"],
    ["smooth", "a.sdm", "b.sdm", "--time", "1", "--steps", "2", "--mode", "gpu"],
    ["bench", "--grid", "5by8"],
    ["bench", "--reps", "0"],
    ["nosuchcommand"],
])
def test_usage_errors_exit_2(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.chdir(tmp_path)
    assert run(capsys, *argv)[0] == 2


def test_bad_thread_env_exit_2(tmp_path, monkeypatch, capsys):
    src = tmp_path / "in.sdm"
    run(capsys, "gen", "--type", "noise", "--nt", 5, "--np", 8, "-o", src)
    monkeypatch.setenv("DIFFUSE_NUM_THREADS", "zero")
    code, _, err = run(capsys, "smooth", src, tmp_path / "o.sdm", "--time", 0.01, "--steps", 2,
                       "--mode", "parallel-loops")
    assert code == 2 and "DIFFUSE_NUM_THREADS" in err


@pytest.fixture
def noise_map(tmp_path, capsys):
    path = tmp_path / "in.sdm"
    assert run(capsys, "gen", "--type", "noise", "--nt", 33, "--np", 64, "--seed", 5, "--stretch", 0.3,
               "-o", path)[0] == 0
    return path


def test_smooth_zero_time_is_identity(tmp_path, capsys, noise_map):
    out = tmp_path / "out.sdm"
    for t, n in (("0", "0"), ("0", "3")):
        code, text, _ = run(capsys, "smooth", noise_map, out, "--time", t, "--steps", n)
        assert code == 0
        assert out.read_bytes() == noise_map.read_bytes()
        assert "steps_taken 0" in text


def test_smooth_modes_agree_and_report_accounting(tmp_path, capsys, noise_map):
    outputs = {}
    for mode, threads in (("serial", "1"), ("parallel-loops", "3"), ("parallel-all", "2")):
        out = tmp_path / f"{mode}.sdm"
        code, text, _ = run(capsys, "smooth", noise_map, out, "--time", 0.01, "--steps", 4,
                            "--mode", mode, "--threads", threads)
        assert code == 0
        outputs[mode] = out.read_bytes()
        s = int(re.search(r"stages_per_step (\d+)\n", text).group(1))
        assert f"total_operator_applications {4 * (s + 1)}" in text
        assert f"stencil_sweeps {4 * s}" in text
        assert "steps_taken 4" in text
    assert outputs["serial"] == outputs["parallel-loops"] == outputs["parallel-all"]


def test_smooth_matches_library(tmp_path, capsys):
    grid = build_uniform_grid(17, 32)
    src = tmp_path / "h.sdm"
    write_map(src, grid, gen_harmonic(grid, 2, 2))
    out = tmp_path / "o.sdm"
    assert run(capsys, "smooth", src, out, "--time", 0.02, "--steps", 3, "--nu", 0.5)[0] == 0
    ref, _ = advance(build_operator(grid, 0.5), gen_harmonic(grid, 2, 2), 0.02, 3)
    assert np.array_equal(read_map(out)[1].values, ref.values)


def test_smooth_invalid_map_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.sdm"
    bad.write_bytes(b"SDM1garbage")
    code, _, err = run(capsys, "smooth", bad, tmp_path / "o.sdm", "--time", 0.1, "--steps", 1)
    assert code == 1 and "error" in err
    code, _, _ = run(capsys, "smooth", tmp_path / "missing.sdm", tmp_path / "o.sdm", "--time", 0.1,
                     "--steps", 1)
    assert code == 1


def test_bench_csv_rows(tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    code, _, _ = run(capsys, "bench", "--grid", "9x16", "--modes", "serial", "--reps", 3,
                     "--warmup", 0, "--steps", 2, "--csv", csv_path)
    assert code == 0
    reps, summary = parse_csv(csv_path.read_text())
    assert len(reps) == 3 and len(summary) == 1
    assert summary[0]["speedup"] == "1.0"


@pytest.mark.filterwarnings("ignore:requested thread counts")
def test_bench_stdout_table(capsys):
    code, out, _ = run(capsys, "bench", "--grid", "5x8,9x16", "--modes", "serial,parallel-loops",
                       "--threads", "1,2", "--reps", 2, "--warmup", 0, "--steps", 1)
    assert code == 0
    assert out.count("| parallel-loops |") == 4 and out.count("| serial |") == 2


def test_info(capsys):
    code, out, _ = run(capsys, "info")
    assert code == 0 and "logical cores" in out


@pytest.mark.parametrize("cmd", ["gen", "smooth", "validate", "bench", "info"])
def test_help_for_every_subcommand(capsys, cmd):
    code, out, _ = run(capsys, cmd, "--help")
    assert code == 0 and "usage: diffuse " + cmd in out


def test_mode_help_names_versions():
    text = build_parser()._subparsers._group_actions[0].choices["smooth"].format_help()
    for word in ("serial", "parallel-loops", "parallel-all", "New", "Experimental"):
        assert word in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "diffuse.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "diffuse" in proc.stdout
