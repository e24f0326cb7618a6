import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ltikernels.signals import PiecewiseConstantSignal

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def step():
    return PiecewiseConstantSignal.step(0.0)


@pytest.fixture
def mixed_input():
    """A signed piecewise-constant input with a gap and a late return to zero."""
    return PiecewiseConstantSignal([0.0, 0.3, 0.7, 1.1], [1.0, -0.5, 2.0, 0.0])


def random_psd(rng, n, rank=None):
    A = rng.standard_normal((n, rank or n))
    return A @ A.T


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
