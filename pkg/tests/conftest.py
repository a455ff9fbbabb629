import numpy as np
import pytest

from explogistic.data import simulate_biased

TRUTH = (0.5, 2.0, 0.5)

# (criterion number, title, passed, detail) collected by test_acceptance.py
ACCEPTANCE_RESULTS = []


@pytest.fixture
def record_criterion():
    def record(number, title, passed, detail=""):
        ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))
        return passed
    return record


@pytest.fixture(scope="session")
def simulated():
    """The default simulated-data recipe at seed 23."""
    return simulate_biased(2500, *TRUTH, 250, np.random.default_rng(23))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {title}: {detail}")
