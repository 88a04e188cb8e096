"""Nonlinear least-squares problems.

A problem exposes a residual ``F: R^n -> R^m`` and its Jacobian. The merit
function minimised by every solver in this package is ``f(x) = 0.5*||F(x)||^2``
and its gradient is ``J(x)^T F(x)``.

Jacobians are returned either as dense ``ndarray`` objects or as
:class:`scipy.sparse.linalg.LinearOperator` instances; downstream code only
relies on ``J @ v`` and ``J.T @ w``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator


class DimensionError(ValueError):
    """Raised when a vector does not match the declared problem dimensions."""


@dataclass
class EvalCounters:
    residual: int = 0
    jacobian: int = 0

    def reset(self) -> None:
        self.residual = 0
        self.jacobian = 0


def as_dense(J) -> np.ndarray:
    """Densify a Jacobian returned by :meth:`NlsProblem.jacobian`."""
    if isinstance(J, np.ndarray):
        return J
    if isinstance(J, LinearOperator):
        return J @ np.eye(J.shape[1])
    return np.asarray(J.toarray())


class NlsProblem:
    """Base class for ``min 0.5*||F(x)||^2``.

    Subclasses implement ``_residual`` and ``_jacobian``. The public
    ``residual``/``jacobian`` wrappers check dimensions and bump the
    evaluation counters, which are the only mutable state on a problem.
    """

    name = "nls"

    def __init__(self, n: int, m: int):
        self.n = int(n)
        self.m = int(m)
        self.counters = EvalCounters()

    # -- oracles -----------------------------------------------------------
    def _residual(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, x: np.ndarray):
        raise NotImplementedError

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"expected x of shape ({self.n},), got {x.shape}")
        return x

    def residual(self, x) -> np.ndarray:
        x = self._check_x(x)
        self.counters.residual += 1
        F = np.asarray(self._residual(x), dtype=float)
        if F.shape != (self.m,):
            raise DimensionError(f"residual has shape {F.shape}, expected ({self.m},)")
        return F

    def jacobian(self, x):
        x = self._check_x(x)
        self.counters.jacobian += 1
        J = self._jacobian(x)
        if tuple(J.shape) != (self.m, self.n):
            raise DimensionError(f"Jacobian has shape {J.shape}, expected ({self.m}, {self.n})")
        return J

    # -- derived quantities ------------------------------------------------
    def merit(self, x) -> float:
        F = self.residual(x)
        return 0.5 * float(F @ F)

    def gradient(self, x) -> np.ndarray:
        F = self.residual(x)
        J = self.jacobian(x)
        return J.T @ F

    def default_start(self) -> np.ndarray:
        return np.ones(self.n)

    def with_fresh_counters(self) -> "NlsProblem":
        """Shallow copy sharing the (immutable) data but with new counters."""
        other = copy.copy(self)
        other.counters = EvalCounters()
        return other

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, m={self.m})"


def eval_merit(problem: NlsProblem, x) -> float:
    return problem.merit(x)


def eval_gradient(problem: NlsProblem, x) -> np.ndarray:
    return problem.gradient(x)


class FunctionProblem(NlsProblem):
    """Problem defined by user callables ``residual(x)`` and ``jacobian(x)``."""

    name = "function"

    def __init__(self, residual, jacobian, n: int, m: int, name: str | None = None):
        super().__init__(n, m)
        self._res_fn = residual
        self._jac_fn = jacobian
        if name is not None:
            self.name = name

    def _residual(self, x):
        return self._res_fn(x)

    def _jacobian(self, x):
        J = self._jac_fn(x)
        if isinstance(J, LinearOperator):
            return J
        return np.atleast_2d(np.asarray(J, dtype=float))


class LinearProblem(NlsProblem):
    """Affine residual ``F(x) = A x - b``; handy for tests."""

    name = "linear"

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__(A.shape[1], A.shape[0])
        self.A = A
        self.b = np.asarray(b, dtype=float).reshape(self.m)

    def _residual(self, x):
        return self.A @ x - self.b

    def _jacobian(self, x):
        return self.A


class BroydenTridiagonal(NlsProblem):
    """Broyden tridiagonal function (BROYDN3D), ``m = n = d``.

    ``F_i = (3 - 2 x_i) x_i - x_{i-1} - 2 x_{i+1} + 1`` with ``x_0 = x_{d+1} = 0``.
    """

    name = "broydn3d"

    def __init__(self, d: int):
        super().__init__(d, d)

    def _residual(self, x):
        xm = np.concatenate(([0.0], x[:-1]))
        xp = np.concatenate((x[1:], [0.0]))
        return (3.0 - 2.0 * x) * x - xm - 2.0 * xp + 1.0

    def _jacobian(self, x):
        d = self.n
        J = np.zeros((d, d))
        idx = np.arange(d)
        J[idx, idx] = 3.0 - 4.0 * x
        J[idx[1:], idx[:-1]] = -1.0
        J[idx[:-1], idx[1:]] = -2.0
        return J


class FreudensteinRoth(NlsProblem):
    """Extended Freudenstein-Roth function (FREURONE), ``n = d``, ``m = 2(d-1)``.

    For ``i = 1..d-1`` the residual pair is::

        F_{2i-1} = -13 + x_i + ((5 - x_{i+1}) x_{i+1} - 2) x_{i+1}
        F_{2i}   = -29 + x_i + ((x_{i+1} + 1) x_{i+1} - 14) x_{i+1}
    """

    name = "freurone"

    def __init__(self, d: int):
        super().__init__(d, 2 * (d - 1))

    def _residual(self, x):
        a, b = x[:-1], x[1:]
        F = np.empty(self.m)
        F[0::2] = -13.0 + a + ((5.0 - b) * b - 2.0) * b
        F[1::2] = -29.0 + a + ((b + 1.0) * b - 14.0) * b
        return F

    def _jacobian(self, x):
        d = self.n
        b = x[1:]
        J = np.zeros((self.m, d))
        rows = np.arange(d - 1)
        J[2 * rows, rows] = 1.0
        J[2 * rows + 1, rows] = 1.0
        J[2 * rows, rows + 1] = 10.0 * b - 3.0 * b**2 - 2.0
        J[2 * rows + 1, rows + 1] = 3.0 * b**2 + 2.0 * b - 14.0
        return J


BUILTIN_PROBLEMS = {
    "broydn3d": BroydenTridiagonal,
    "freurone": FreudensteinRoth,
}


def builtin_problem(name: str, d: int) -> NlsProblem:
    """Instantiate a built-in problem of size parameter ``d`` (``d >= 3``)."""
    key = name.lower()
    if key not in BUILTIN_PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; available: {sorted(BUILTIN_PROBLEMS)}")
    if d < 3:
        raise ValueError("size parameter d must be >= 3")
    return BUILTIN_PROBLEMS[key](int(d))


class AugmentedProblem(NlsProblem):
    """Low-rank lifting ``F(x) = Phi(A x)`` of an inner problem ``Phi: R^p -> R^m``.

    ``A`` is ``p x n`` with i.i.d. uniform ``[0, 1]`` entries scaled to unit
    Frobenius norm, so ``J(x) = J_Phi(A x) A`` has rank at most ``p``.
    """

    def __init__(self, inner: NlsProblem, A: np.ndarray, seed: int | None = None):
        p, n = A.shape
        if p != inner.n:
            raise DimensionError("augmentation matrix rows must equal inner.n")
        super().__init__(n, inner.m)
        self.inner = inner
        self.A = A
        self.seed = seed
        self.name = f"aug-{inner.name}"

    @property
    def p(self) -> int:
        return self.inner.n

    def _residual(self, x):
        return self.inner._residual(self.A @ x)

    def _jacobian(self, x):
        JPhi = as_dense(self.inner._jacobian(self.A @ x))
        return JPhi @ self.A

    def with_fresh_counters(self):
        other = super().with_fresh_counters()
        other.inner = self.inner.with_fresh_counters()
        return other


def make_augmented(inner: NlsProblem, n: int, seed: int) -> AugmentedProblem:
    p = inner.n
    if n <= p:
        raise ValueError(f"augmented dimension n={n} must exceed inner dimension p={p}")
    rng = np.random.Generator(np.random.Philox(seed))
    A = rng.uniform(0.0, 1.0, size=(p, n))
    A /= np.linalg.norm(A, "fro")
    return AugmentedProblem(inner, A, seed=seed)


class ShiftedProblem(NlsProblem):
    """``F(x) - F(x_star)``: a zero-residual copy of ``base`` with root ``x_star``."""

    def __init__(self, base: NlsProblem, x_star):
        super().__init__(base.n, base.m)
        self.base = base
        self.x_star = np.asarray(x_star, dtype=float).copy()
        self._offset = np.asarray(base._residual(self.x_star), dtype=float)
        self.name = f"shift-{base.name}"

    def _residual(self, x):
        return self.base._residual(x) - self._offset

    def _jacobian(self, x):
        return self.base._jacobian(x)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ClassificationProblem(NlsProblem):
    """Least-squares logistic loss ``F_i(x) = b_i - sigmoid(a_i^T x)``.

    ``features`` may be a dense array or a scipy sparse matrix (rows ``a_i``).
    The Jacobian is matrix-free: ``J = -diag(sigmoid'(A x)) A``.
    """

    name = "classification"

    def __init__(self, features, labels, val_features=None, val_labels=None):
        m, n = features.shape
        super().__init__(n, m)
        self.features = features
        self.labels = np.asarray(labels, dtype=float).reshape(m)
        if np.any((self.labels != 0.0) & (self.labels != 1.0)):
            raise ValueError("labels must be 0 or 1")
        self.val_features = val_features
        self.val_labels = None if val_labels is None else np.asarray(val_labels, dtype=float)

    def _residual(self, x):
        return self.labels - sigmoid(self.features @ x)

    def _jacobian(self, x):
        s = sigmoid(self.features @ x)
        d = -s * (1.0 - s)
        A = self.features
        return LinearOperator(
            (self.m, self.n),
            matvec=lambda v: d * (A @ np.ravel(v)),
            rmatvec=lambda w: A.T @ (d * np.ravel(w)),
            dtype=float,
        )

    def default_start(self):
        return np.zeros(self.n)


def classification_accuracy(problem: ClassificationProblem, x) -> float:
    """Fraction of validation labels predicted correctly (probability 0.5 predicts 1)."""
    if problem.val_features is None or problem.val_labels is None or len(problem.val_labels) == 0:
        raise ValueError("problem has no validation split")
    prob = sigmoid(problem.val_features @ np.asarray(x, dtype=float))
    predicted = (prob >= 0.5).astype(float)
    return float(np.mean(predicted == problem.val_labels))
