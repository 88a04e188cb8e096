"""Solvers for the regularised sketched least-squares subproblem.

The subproblem is the stacked linear least-squares problem::

    min_s || G s - rhs ||,   G = [ J M^T ; sqrt(mu) I ],   rhs = -[F ; 0]

whose normal equations are ``(M J^T J M^T + mu I) s = -M J^T F``. The
residual of the normal equations is ``rho = G^T (G s - rhs)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .problems import as_dense
from .sketching import SketchOperator, draw

DENSE_CAP = 4000


class DensificationError(ValueError):
    """The requested dense path would exceed the configured size cap."""


class StackedOperator:
    """``s -> [J M^T s ; sqrt(mu) s]`` and its transpose ``(u; v) -> M J^T u + sqrt(mu) v``."""

    def __init__(self, J, M: SketchOperator, mu: float):
        if not mu > 0.0:
            raise ValueError(f"regularisation mu must be positive, got {mu}")
        m, n = J.shape
        if M.n != n:
            raise ValueError(f"sketch has {M.n} columns but Jacobian has {n}")
        self.J = J
        self.M = M
        self.mu = float(mu)
        self.sqrt_mu = math.sqrt(mu)
        self.m, self.n, self.ell = m, n, M.ell

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m + self.ell, self.ell)

    def matvec(self, s_hat: np.ndarray) -> np.ndarray:
        top = self.J @ self.M.apply_transpose(s_hat)
        return np.concatenate((top, self.sqrt_mu * s_hat))

    def rmatvec(self, w: np.ndarray) -> np.ndarray:
        u, v = w[: self.m], w[self.m:]
        return self.M.apply(self.J.T @ u) + self.sqrt_mu * v

    def sketched_jacobian(self) -> np.ndarray:
        """Dense ``J M^T`` (``m x l``)."""
        if isinstance(self.J, np.ndarray):
            return self.M.apply(self.J.T).T
        return as_dense(self.J) @ self.M.apply_transpose(np.eye(self.ell))

    def todense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.ell > cap:
            raise DensificationError(f"ell={self.ell} exceeds dense cap {cap}")
        return np.vstack((self.sketched_jacobian(), self.sqrt_mu * np.eye(self.ell)))


def stacked_rhs(F: np.ndarray, ell: int) -> np.ndarray:
    return -np.concatenate((F, np.zeros(ell)))


@dataclass
class KrylovResult:
    s_hat: np.ndarray
    iterations: int
    rho_norm: float
    rho0_norm: float
    converged: bool


def _sym_ortho(a: float, b: float) -> tuple[float, float, float]:
    """Stable Givens rotation: returns ``(c, s, r)`` with ``r = hypot(a, b)``."""
    if b == 0.0:
        return (math.copysign(1.0, a) if a != 0 else 1.0), 0.0, abs(a)
    if a == 0.0:
        return 0.0, math.copysign(1.0, b), abs(b)
    if abs(b) > abs(a):
        tau = a / b
        s = math.copysign(1.0, b) / math.sqrt(1.0 + tau * tau)
        return s * tau, s, b / s
    tau = b / a
    c = math.copysign(1.0, a) / math.sqrt(1.0 + tau * tau)
    return c, c * tau, a / c


def _true_rho(G: StackedOperator, x: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.linalg.norm(G.rmatvec(G.matvec(x) - rhs)))


def lsmr_solve(G: StackedOperator, rhs: np.ndarray, eta: float, max_iters: int | None = None,
               reorthogonalize: bool = True) -> KrylovResult:
    """LSMR on the stacked operator, started from zero.

    Stops at the first iterate whose normal-equation residual satisfies
    ``||G^T (G s - rhs)|| <= eta * ||G^T rhs||``; the test is confirmed on
    the explicitly recomputed residual, not only on the recurrence estimate.
    Otherwise returns iterate ``max_iters`` with ``converged=False``.

    With ``reorthogonalize`` the right Lanczos vectors are kept orthogonal
    (Fong and Saunders' local reorthogonalisation with unlimited window).
    Without it, loss of orthogonality on ill-conditioned systems lets
    ``s^T rho`` drift away from its exact-arithmetic sign.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("forcing term eta must be in [0, 1)")
    if max_iters is None:
        max_iters = min(G.m, G.ell)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise FloatingPointError("non-finite right-hand side")

    ell = G.ell
    x = np.zeros(ell)
    u = rhs.copy()
    beta = float(np.linalg.norm(u))
    if beta > 0:
        u /= beta
        v = G.rmatvec(u)
        alpha = float(np.linalg.norm(v))
    else:
        v = np.zeros(ell)
        alpha = 0.0
    if alpha > 0:
        v /= alpha
    basis = [v.copy()] if reorthogonalize else None
    rho0 = alpha * beta
    if rho0 == 0.0:
        return KrylovResult(x, 0, 0.0, 0.0, True)
    tol = eta * rho0

    zetabar = alpha * beta
    alphabar = alpha
    rho = 1.0
    rhobar = 1.0
    cbar = 1.0
    sbar = 0.0
    h = v.copy()
    hbar = np.zeros(ell)

    rho_norm = rho0
    converged = False
    itn = 0
    while itn < max_iters:
        itn += 1
        u = G.matvec(v) - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0:
            u /= beta
            v = G.rmatvec(u) - beta * v
            if basis is not None:
                V = np.asarray(basis)
                v -= V.T @ (V @ v)
            alpha = float(np.linalg.norm(v))
            if alpha > 0:
                v /= alpha
                if basis is not None:
                    basis.append(v.copy())

        rhoold = rho
        c, s, rho = _sym_ortho(alphabar, beta)
        thetanew = s * alpha
        alphabar = c * alpha

        rhobarold = rhobar
        thetabar = sbar * rho
        cbar, sbar, rhobar = _sym_ortho(cbar * rho, thetanew)
        zeta = cbar * zetabar
        zetabar = -sbar * zetabar

        hbar = h - (thetabar * rho / (rhoold * rhobarold)) * hbar
        x = x + (zeta / (rho * rhobar)) * hbar
        h = v - (thetanew / rho) * h

        if not np.all(np.isfinite(x)):
            raise FloatingPointError("LSMR produced non-finite iterate")

        breakdown = beta == 0.0 or alpha == 0.0
        if abs(zetabar) <= tol or breakdown or itn == max_iters:
            rho_norm = _true_rho(G, x, rhs)
            if rho_norm <= tol:
                converged = True
                break
            if breakdown:
                break
    return KrylovResult(x, itn, rho_norm, rho0, converged)


def exact_solve(G: StackedOperator, rhs: np.ndarray, cap: int = DENSE_CAP) -> KrylovResult:
    """Solve the stacked problem by a dense QR factorisation of ``G``."""
    Gd = G.todense(cap)
    rhs = np.asarray(rhs, dtype=float)
    Q, R = np.linalg.qr(Gd, mode="reduced")
    x = sla.solve_triangular(R, Q.T @ rhs)
    rho0 = float(np.linalg.norm(Gd.T @ rhs))
    rho = float(np.linalg.norm(Gd.T @ (Gd @ x - rhs)))
    if rho0 == 0.0:
        x = np.zeros(G.ell)
        rho = 0.0
    return KrylovResult(x, 0, rho, rho0, True)


class Spectrum(NamedTuple):
    lam_max: float
    lam_min_nonzero: float
    rank: int


RANK_RTOL = 1e-12


def spectral_extremes(B, cap: int = DENSE_CAP) -> Spectrum:
    """Largest eigenvalue, smallest nonzero eigenvalue and numerical rank of a
    symmetric positive semidefinite matrix (eigenvalues below ``1e-12*lam_max``
    count as zero)."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] > cap:
        raise DensificationError(f"matrix of order {B.shape[0]} exceeds dense cap {cap}")
    w = np.linalg.eigvalsh(0.5 * (B + B.T))
    lam_max = float(w[-1])
    if lam_max <= 0.0:
        return Spectrum(0.0, 0.0, 0)
    nz = w[w > RANK_RTOL * lam_max]
    return Spectrum(lam_max, float(nz[0]), int(nz.size))


def sketched_gram(J, M: SketchOperator) -> np.ndarray:
    """Dense ``M J^T J M^T``."""
    JM = StackedOperator(J, M, 1.0).sketched_jacobian()
    return JM.T @ JM


def identity_stack(J, mu: float) -> StackedOperator:
    return StackedOperator(J, draw("identity", J.shape[1], J.shape[1]), mu)
