import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from jacobi_wvn.core import PeriodicOperator

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def free1():
    return PeriodicOperator([1.0], [0.0])


@pytest.fixture
def dimer():
    return PeriodicOperator([1.0, 2.0], [0.0, 0.0])


@pytest.fixture
def trimer():
    return PeriodicOperator([1.0, 1.5, 0.8], [0.2, -0.3, 0.1])


@st.composite
def operators(draw, max_period=8):
    T = draw(st.integers(1, max_period))
    a = draw(st.lists(st.floats(0.3, 3.0), min_size=T, max_size=T))
    b = draw(st.lists(st.floats(-2.0, 2.0), min_size=T, max_size=T))
    return PeriodicOperator(a, b)


@st.composite
def interior_points(draw, max_period=4, margin=0.02):
    """(operator, band, lambda) with lambda inside a band, away from edges."""
    from jacobi_wvn.bands import find_bands, invert_theta
    op = draw(operators(max_period=max_period))
    bands = find_bands(op)
    band = bands[draw(st.integers(0, len(bands) - 1))]
    th = draw(st.floats(margin * math.pi, (1 - margin) * math.pi))
    return op, band, invert_theta(op, band, th)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
