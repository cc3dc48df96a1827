import numpy as np
import pytest

from fastdsom.bench import benchmark_matrix
from fastdsom.dissimilarity import DissimilarityMatrix

_acceptance_lines = []


def random_int_matrix(n, rng, high=10, low=0):
    """Symmetric integer dissimilarities in [low, high) off the diagonal."""
    upper = np.triu(rng.integers(low, high, size=(n, n)), 1)
    return DissimilarityMatrix((upper + upper.T).astype(float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def square60():
    return benchmark_matrix(60, 1)


@pytest.fixture
def record_criterion():
    """Print and remember one pass/fail line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        print(line)
        _acceptance_lines.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
