"""
Shared fixtures for the ERKC test suite.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from tools.delay_mesh import DelaySpec, DiscontinuitySet, build_mesh, compute_discontinuities  # noqa: E402
from tools.phi_functions import radau_scheme  # noqa: E402
from tools.problem_defs import example_1  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: convergence-order acceptance runs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def radau2():
    return radau_scheme(2)


@pytest.fixture
def ex1_small():
    return example_1(16)


@pytest.fixture
def ex1_mesh(ex1_small):
    disc = compute_discontinuities(ex1_small.delay, ex1_small.T)
    return build_mesh(disc, 0.125)


@pytest.fixture
def unit_disc():
    """Discontinuity set with a single point at 1 on [0, 3]."""
    return DiscontinuitySet(xi=(1.0,), T=3.0, tau0=0.5, history_start=-0.5)


@pytest.fixture
def constant_delay():
    return DelaySpec(tau=lambda t: 0.3, tau0=0.3, history_start=-0.3, label="0.3")
