import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from rdbcd.design import DesignSpace

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BINARY = DesignSpace(1, 1)
UNIFORM = np.full(4, 0.25)
NONUNIFORM = np.array([0.2, 0.3, 0.4, 0.1])


@pytest.fixture
def binary():
    return BINARY


@st.composite
def spaces(draw, max_levels=2):
    return DesignSpace(draw(st.integers(1, max_levels)), draw(st.integers(1, max_levels)))


@st.composite
def distributions(draw, K, low=0.05):
    raw = np.array(draw(st.lists(st.floats(low, 1.0), min_size=K, max_size=K)))
    return raw / raw.sum()


@st.composite
def allocations(draw, K, low=0.02, high=0.98):
    return np.array(draw(st.lists(st.floats(low, high), min_size=K, max_size=K)))


@st.composite
def thetas(draw, K, bound=5.0):
    return np.array(draw(st.lists(st.floats(-bound, bound), min_size=K, max_size=K)))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``(criterion, passed, detail)`` line for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number: int, title: str, passed: bool, detail: str = ""):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
        if detail:
            line += f": {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
