import numpy as np
import pytest

from spikeseq.seqio import generate_synthetic

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_dataset():
    """5 classes x 100 records, length 200, mutation rate 0.02, seed 0."""
    return generate_synthetic(5, [100] * 5, 200, 0.02, 0)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
