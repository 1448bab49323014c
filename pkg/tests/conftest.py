import numpy as np
import pytest

from ccbounds.manifold import ConstraintSet

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    B = rng.standard_normal((n, rank))
    return B @ B.T


def quadric_constraints(rng, M, K, theta0):
    """K random quadrics ``t^T A_k t + b_k^T t + c_k = 0`` passing through theta0."""
    A = rng.standard_normal((K, M, M))
    A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    b = rng.standard_normal((K, M))
    c = -(np.einsum("i,kij,j->k", theta0, A, theta0) + b @ theta0)
    return ConstraintSet(
        M, K,
        f=lambda t: np.einsum("i,kij,j->k", t, A, t) + b @ t + c,
        jacobian=lambda t: 2 * np.einsum("kij,j->ki", A, t) + b,
        name="quadric",
    )


def random_problem(rng, M=None, K=None, w_rank=None):
    """Feasible point, numeric constraint set, PD Fisher matrix and PSD weight."""
    M = int(rng.integers(2, 6)) if M is None else M
    K = int(rng.integers(1, M)) if K is None else K
    theta0 = rng.standard_normal(M)
    cs = quadric_constraints(rng, M, K, theta0)
    J = random_psd(rng, M, M + 1)
    r = int(rng.integers(0, M + 1)) if w_rank is None else w_rank
    W = random_psd(rng, M, r) if r else np.zeros((M, M))
    return theta0, cs, J, W


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
