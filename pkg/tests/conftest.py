import numpy as np
import pytest

from brafl.core import keyed_generator


@pytest.fixture
def rng():
    return keyed_generator(1234, 0)


def cluster_with_outliers(rng, K, M, d, radius=1e-3, far=(10.0, 100.0)):
    """Tight honest cluster plus M outliers; returns (X, honest_mask) with outliers last."""
    center = rng.standard_normal(d)
    X = center + radius * rng.standard_normal((K, d)) / np.sqrt(d)
    if M:
        dirs = rng.standard_normal((M, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        X[K - M:] = center + dirs * rng.uniform(*far, size=(M, 1))
    honest = np.ones(K, dtype=bool)
    honest[K - M:] = False
    return X, honest


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
