import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scrap import IntegratorConfig, PulseParams

settings.register_profile("scrap", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("scrap")


@pytest.fixture
def ref():
    """Reference pulse set with the Stark pulse at (tau, sigma) = (0.3, 2)."""
    return PulseParams()


@pytest.fixture
def tight():
    return IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_result(n, ok, detail))
