from __future__ import annotations

import numpy as np
import pytest

from pnlab.core import congruence, det1_normalize

ACCEPTANCE_LINES: list[str] = []


def random_spd(rng: np.random.Generator, n: int, spread: float = 0.5) -> np.ndarray:
    A = np.eye(n) + spread * rng.standard_normal((n, n))
    while abs(np.linalg.det(A)) < 0.1:
        A = np.eye(n) + spread * rng.standard_normal((n, n))
    return A.T @ A


def random_det1(rng: np.random.Generator, n: int, spread: float = 0.5) -> np.ndarray:
    return det1_normalize(random_spd(rng, n, spread))


def random_upper(rng: np.random.Generator, n: int) -> np.ndarray:
    t = np.triu(rng.uniform(-1, 1, (n, n)), 1)
    t[np.diag_indices(n)] = rng.uniform(0.5, 2.0, n)
    return t


def random_unimodular(rng: np.random.Generator, n: int, steps: int = 4, h: int = 2) -> np.ndarray:
    A = np.eye(n, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(n, 2, replace=False)
        E = np.eye(n, dtype=np.int64)
        E[i, j] = rng.integers(-h, h + 1)
        A = A @ E
    return A[:, rng.permutation(n)] * rng.choice([-1, 1], n)


def scramble(Y, A) -> np.ndarray:
    return congruence(Y, A)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
