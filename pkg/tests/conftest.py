import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


# acceptance criteria append "PASS/FAIL ..." lines here; printed after the run
CRITERIA_REPORT: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_REPORT:
            terminalreporter.write_line(line)
