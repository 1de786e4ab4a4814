import numpy as np
import pytest

from privselect import make_blobs, zscore_normalize

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def blobs():
    return zscore_normalize(make_blobs(n_records=400, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
