"""Shared fixtures: ground states and semiclassical setups reused across modules."""

import numpy as np
import pytest

from fkl.grid import make_grid
from fkl.ground_state import BaseParams, solve_Q
from fkl.kirchhoff import KirchhoffParams, build_U
from fkl.potentials import PotentialSpec
from fkl.semiclassical import Semiclassical

ACCEPTANCE_LINES = []


def bo_exact(x):
    return 2.0 / (1.0 + x * x)


def bo_periodic(x, L):
    """Exact 2L-periodic solution of (-D^2)^{1/2}Q + Q = Q^2 (Poisson-kernel soliton)."""
    k = np.pi / L
    g = np.arctanh(k)
    # cosh g - cos t written as 2 sinh^2(g/2) + 2 sin^2(t/2) to avoid cancellation at the peak
    return k * np.sinh(g) / (2 * np.sinh(g / 2) ** 2 + 2 * np.sin(k * x / 2) ** 2)


@pytest.fixture(scope="session")
def bo_params():
    return BaseParams(0.5, 2.0, 1)


@pytest.fixture(scope="session")
def bo_result(bo_params):
    return solve_Q(bo_params, make_grid(1, 200.0, 8192))


@pytest.fixture(scope="session")
def small_bo(bo_params):
    """Coarse Benjamin-Ono ground state for the dense-matrix oracles."""
    return solve_Q(bo_params, make_grid(1, 60.0, 1024))


@pytest.fixture(scope="session")
def well_setup():
    """s = 0.8, p = 2, a = 1, b = 0.5 with V = 1 + min(|x-0.3|^2, 1)."""
    base = BaseParams(0.8, 2.0, 1)
    Q = solve_Q(base, make_grid(1, 200.0, 8192)).Q
    V = PotentialSpec("quadratic_well", x0=(0.3,), base=1.0, height=1.0, r0=1.0)
    kp = KirchhoffParams(1.0, 0.5, V.value_at_x0, base)
    U = build_U(Q, kp).U
    return Semiclassical(U, kp, V)


@pytest.fixture(scope="session")
def cubic_setup():
    """p = 3 variant (cubic leading remainder), coarser grid."""
    base = BaseParams(0.8, 3.0, 1)
    Q = solve_Q(base, make_grid(1, 100.0, 4096)).Q
    V = PotentialSpec("quadratic_well", x0=(0.0,), base=1.0, height=1.0, r0=1.0)
    kp = KirchhoffParams(1.0, 0.5, V.value_at_x0, base)
    return Semiclassical(build_U(Q, kp).U, kp, V)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
            terminalreporter.write_line(line[1])
