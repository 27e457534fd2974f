import numpy as np
import pytest

from diffuse import ScalarField, build_stretched_grid, build_uniform_grid

ACCEPTANCE_LINES = []


def random_field(grid, seed=0, low=-1.0, high=1.0):
    """Random values with single-valued pole rows."""
    v = np.random.default_rng(seed).uniform(low, high, grid.shape)
    v[0] = v[0, 0]
    v[-1] = v[-1, 0]
    return ScalarField(grid, v)


@pytest.fixture
def small_uniform():
    return build_uniform_grid(5, 8)


@pytest.fixture
def small_stretched():
    return build_stretched_grid(6, 8, 0.5)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
