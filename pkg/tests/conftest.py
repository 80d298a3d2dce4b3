import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from qpurify.models import random_channel, random_density

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=4)
n_outcomes = st.integers(min_value=1, max_value=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (a + a.conj().T) / 2


def channel_and_state(seed, d, k):
    rng = np.random.default_rng(seed)
    return random_channel(d, k, rng), random_density(d, rng)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" in report.nodeid and (
            report.when == "call" or report.outcome == "failed"):
        name = report.nodeid.split("::test_criterion_")[1]
        number, _, label = name.partition("_")
        detail = ""
        for key, value in report.user_properties:
            if key == "detail":
                detail = value
        _ACCEPTANCE.append((int(number), label, report.outcome, report.duration, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, outcome, duration, detail in sorted(_ACCEPTANCE):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {number} {label}: {verdict} ({duration:.1f} s)"
        terminalreporter.write_line(line + (f"  {detail}" if detail else ""))
