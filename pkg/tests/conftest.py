import math

import pytest

from orv.driving import Exponential, InvertedDirichlet
from orv.liouville import normalize
from orv.regvar import BoxRegion, ScalingSpec

INF = math.inf


@pytest.fixture(scope="session")
def ref():
    """d=2, a=(1,1), g=(1+t)^-3; kappa = 2."""
    return normalize((1.0, 1.0), InvertedDirichlet(3.0))


@pytest.fixture(scope="session")
def ref5():
    return normalize((1.0, 1.0), InvertedDirichlet(5.0))


@pytest.fixture(scope="session")
def expo2():
    return normalize((1.0, 1.0), Exponential(1.0))


@pytest.fixture(scope="session")
def iso(ref):
    return ScalingSpec.build((1, 1), ref)


@pytest.fixture(scope="session")
def op12(ref):
    return ScalingSpec.build((1, 2), ref)


@pytest.fixture
def quadrant():
    return BoxRegion((1.0, 1.0), (INF, INF))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip(":").split("-")[0]), s)):
        terminalreporter.write_line(line)
