import numpy as np
import pytest

from twistlab.grid import GridFunction, make_grid
from twistlab.laguerre import build_basis


@pytest.fixture(scope="session")
def desk_grid():
    return make_grid(1, 128, 16.0)


@pytest.fixture(scope="session")
def desk_basis(desk_grid):
    return build_basis(desk_grid, 32)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(1, 32, 8.0)


def gaussian(grid, center=(0.0, 0.0), width=1.0, k=(0.0, 0.0)):
    """Modulated Gaussian exp(-|z - c|^2 / (2 width^2)) e^{i k . z}."""
    x, y = grid.coords()
    vals = np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * width ** 2))
    vals = vals * np.exp(1j * (k[0] * x + k[1] * y))
    return GridFunction(grid, np.broadcast_to(vals, grid.shape))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
