"""Shared fixtures: expensive ground states are solved once per session."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hwsnls.functionals import ModelSpec
from hwsnls.groundstate import minimize_local_ball, minimize_nehari, minimize_sphere
from hwsnls.spectral import Grid

settings.register_profile(
    "repo", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

# 2-d HW Nehari problem: the minimizer is sharply peaked (core width ~ 0.05),
# so a 512^2 box of side 10 is the finest desk-scale grid that resolves it.
HW2D_GRID = (2, 512, 10.0)


@pytest.fixture(scope="session")
def hw2d_model():
    return ModelSpec("hw", 2.5, 2)


@pytest.fixture(scope="session")
def hw2d_ground_state(hw2d_model):
    return minimize_nehari(1.0, hw2d_model, Grid(*HW2D_GRID))


@pytest.fixture(scope="session")
def snls_model():
    return ModelSpec("snls", 4.0, 1)


@pytest.fixture(scope="session")
def snls_ground_state(snls_model):
    return minimize_local_ball(0.05, snls_model)


@pytest.fixture(scope="session")
def subcritical_ground_states():
    """n = 1, p = 2, r = 1 minimizers on grids sized for their algebraic tails."""
    out = {}
    out["snls"] = minimize_sphere(1.0, ModelSpec("snls", 2.0, 1), Grid(1, 512, 60.0))
    out["hw"] = minimize_sphere(1.0, ModelSpec("hw", 2.0, 1), Grid(1, 8192, 8000.0))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_smooth_field(grid: Grid, rng: np.random.Generator, kmax: float = 4.0):
    """Complex field with random spectrum supported in |xi| <= kmax."""
    from hwsnls.spectral import ComplexField

    hat = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    hat[grid.kabs > kmax] = 0.0
    hat[grid.nyquist_mask] = 0.0
    return ComplexField.from_spectral(grid, hat)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
