import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fmmi.exponents import CompoundClass
from fmmi.probkit import Pmf, bsc

settings.register_profile("fmmi", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fmmi")

UNIFORM2 = Pmf([0.5, 0.5])


@pytest.fixture
def uniform2():
    return UNIFORM2


@pytest.fixture
def bsc01_class():
    return CompoundClass.explicit([bsc(0.1)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_channel(rng, nx=3, ny=3, floor=0.02):
    """Dense random channel with every entry at least ``floor``."""
    W = rng.dirichlet(np.ones(ny), size=nx)
    W = floor + (1 - ny * floor) * W
    return W / W.sum(axis=1, keepdims=True)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
