import itertools

import numpy as np
import pytest


def brute_force_assignment(C: np.ndarray) -> float:
    """Min over all permutation matchings of mean cost (uniform marginals, n == m)."""
    n = C.shape[0]
    best = np.inf
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        best = min(best, C[rows, perm].sum() / n)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
