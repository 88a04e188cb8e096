import numpy as np
import pytest

from sketchlm.problems import as_dense


def fd_jacobian(problem, x):
    """Central-difference Jacobian with step ``1e-6 * (1 + ||x||)``."""
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    J = np.empty((problem.m, problem.n))
    for j in range(problem.n):
        e = np.zeros(problem.n)
        e[j] = h
        J[:, j] = (problem.residual(x + e) - problem.residual(x - e)) / (2 * h)
    return J


def fd_gradient(problem, x):
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    g = np.empty(problem.n)
    for j in range(problem.n):
        e = np.zeros(problem.n)
        e[j] = h
        g[j] = (problem.merit(x + e) - problem.merit(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def dense_jac(problem, x):
    return as_dense(problem.jacobian(x))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))
