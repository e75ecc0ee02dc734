import numpy as np
import pytest

from regal.envs import make_two_state, make_random_wc


@pytest.fixture
def two_state():
    return make_two_state(0.5, 0.1)


@pytest.fixture
def rwc():
    return make_random_wc(4, 2, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
