import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from clickless import core

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(seed, n_modes=1, **kw):
    """Zero-mean random physical state from an integer seed."""
    g = core.random_covariance(n_modes, np.random.default_rng(seed), **kw)
    return core.make_state(np.zeros(2 * n_modes), g)


#: one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
