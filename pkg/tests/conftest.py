import numpy as np
import pytest

from coreset_consensus.space import PointSpace

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def explicit_center(space, ball):
    """Center by coordinate arithmetic, independent of the dot-product path."""
    c = np.zeros(space.dim)
    for i, w in zip(ball.support, ball.weights):
        c += w * space.X[i]
    return c


def coord_dist2(space, i, ball):
    c = explicit_center(space, ball)
    return float(sum((a - b) ** 2 for a, b in zip(space.X[i], c)))


@pytest.fixture
def square():
    return PointSpace.explicit([[0, 0], [1, 0], [0, 1], [1, 1]])


def brute_force_meb_r2(X):
    """Smallest enclosing radius squared by trying every affinely independent subset.

    The optimal ball is the circumball of at most d + 1 points, so the
    minimum over enclosing circumballs is exact. Independent of the library.
    """
    from itertools import combinations

    X = np.asarray(X, dtype=float)
    m, d = X.shape
    best = np.inf
    for k in range(1, min(m, d + 1) + 1):
        for S in combinations(range(m), k):
            P = X[list(S)]
            A = P[1:] - P[0]
            if k > 1:
                M = A @ A.T
                if np.linalg.matrix_rank(M) < k - 1:
                    continue
                lam = np.linalg.solve(M, 0.5 * np.diag(M))
                c = P[0] + lam @ A
            else:
                c = P[0]
            r2 = float(((P[0] - c) ** 2).sum())
            if r2 >= best:
                continue
            if (((X - c) ** 2).sum(axis=1) <= r2 * (1 + 1e-9) + 1e-12).all():
                best = r2
    return best
