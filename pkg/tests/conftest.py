import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stoflin.sampling import DomainSampler

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def box2():
    return DomainSampler([(-0.8, 0.8)] * 2, 0)


@pytest.fixture
def box3():
    return DomainSampler([(-0.8, 0.8)] * 3, 0)


def central_difference(fn, X, i, h=1e-5):
    """Central difference of a batch function ``fn(X) -> (N,)`` along coordinate ``i`` (0-based)."""
    E = np.zeros_like(X)
    E[:, i] = h
    return (fn(X + E) - fn(X - E)) / (2 * h)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
