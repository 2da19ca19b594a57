import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mts2.model import baseline

settings.register_profile(
    "default", max_examples=200, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# One line per acceptance criterion, filled by tests/test_acceptance.py.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}")


@pytest.fixture
def base():
    return baseline()


@pytest.fixture
def kappa20():
    return baseline(kappa=20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
