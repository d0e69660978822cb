import numpy as np
import pytest

from periodic_fsi.beam import BeamParams
from periodic_fsi.coupled import coupled_system
from periodic_fsi.grid import Grid2D
from periodic_fsi.nonlinear import TransformedSolution


def smooth_solution(grid, period=1.0, n_steps=16, amp=1.0):
    """A smooth periodic triple vanishing on the walls where the data must."""
    L = grid.length
    t = (np.arange(n_steps) * period / n_steps)[:, None, None]
    w = 2 * np.pi / period
    X1, Z1 = grid.coordinates("x-face")
    X2, Z2 = grid.coordinates("z-face")
    Xc, Zc = grid.coordinates("center")
    u1 = np.sin(np.pi * Z1) * (1 + 0.5 * np.cos(np.pi * X1 / L)) * np.cos(w * t)
    u2 = np.sin(np.pi * Z2) * np.sin(np.pi * X2 / L) * np.sin(w * t)
    p = np.cos(np.pi * Zc) * (L - Xc) * np.cos(w * t)
    xb = grid.x_centers[None, :]
    tb = t[:, :, 0]
    eta = 0.5 * np.sin(np.pi * xb / L) ** 2 * np.sin(w * tb)
    eta_t = 0.5 * w * np.sin(np.pi * xb / L) ** 2 * np.cos(w * tb)
    n = n_steps
    u = np.concatenate([u1.reshape(n, -1), u2.reshape(n, -1)], axis=1)
    return TransformedSolution(grid, period, amp * u, amp * p.reshape(n, -1), amp * eta,
                               amp * eta_t)


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D(16, 8, 2.0)


@pytest.fixture(scope="session")
def small_system(small_grid):
    return coupled_system(small_grid, BeamParams())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(LINES):
        terminalreporter.write_line(LINES[key])
