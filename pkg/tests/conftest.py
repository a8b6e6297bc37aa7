import numpy as np
import pytest

from storagecoop import Fleet, MarketParams


@pytest.fixture
def canonical():
    return MarketParams.two_period(1.0), Fleet([1.0, 1.0])


def random_instance(rng, n_max=20, nt_max=24):
    """Random market with positive slopes and a fleet of positive costs."""
    n = int(rng.integers(1, n_max + 1))
    nt = int(rng.integers(2, nt_max + 1))
    beta = rng.uniform(10.0, 60.0, nt)
    gamma = rng.uniform(0.01, 0.5, nt)
    eps = rng.uniform(0.2, 3.0, n)
    return MarketParams(beta, gamma), Fleet(eps)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
