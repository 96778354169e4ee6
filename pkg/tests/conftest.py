import numpy as np
import pytest

from orlicz_flow.geometry import SupportField, make_grid

ACCEPTANCE_LINES = []


def random_even_convex(grid, rng, modes=4, amplitude=0.8):
    """Seeded random body ``1 + sum c_k cos 2k theta + s_k sin 2k theta`` with w > 0."""
    c = rng.uniform(-1, 1, modes)
    s = rng.uniform(-1, 1, modes)
    k = 2 * np.arange(1, modes + 1)
    # w = 1 + sum (1 - k^2)(...): keep sum |k^2 - 1| (|c|+|s|) below amplitude
    weight = np.sum((k**2 - 1) * (np.abs(c) + np.abs(s)))
    c, s = c * amplitude / weight, s * amplitude / weight
    t = grid.theta
    h = 1.0 + sum(ci * np.cos(ki * t) + si * np.sin(ki * t) for ci, si, ki in zip(c, s, k))
    return SupportField(grid, h)


@pytest.fixture
def grid256():
    return make_grid(256)


@pytest.fixture
def grid64():
    return make_grid(64)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
