import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from closedorbits import SplitMix64
from closedorbits import thurston

settings.register_profile("lab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def rng():
    return SplitMix64(12345)


@pytest.fixture
def quotient_points(rng):
    return thurston.fundamental_domain_points(1000, rng)



# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
