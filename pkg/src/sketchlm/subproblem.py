"""One sketched Levenberg-Marquardt subproblem and its diagnostic ratios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .krylov import DENSE_CAP, KrylovResult, StackedOperator, exact_solve, lsmr_solve, stacked_rhs
from .problems import NlsProblem
from .sketching import SketchOperator


@dataclass
class SubproblemResult:
    """Step and relative residuals of one subproblem solve.

    When the sketched gradient ``M J^T F`` vanishes the step is zero and the
    ratios ``eta_star``/``nu_star``/``theta_star`` are ``None``; check
    ``null_gradient`` rather than testing the ratios.
    """

    s_hat: np.ndarray
    s: np.ndarray
    sketched_gradient: np.ndarray
    directional_derivative: float
    mu: float
    eta: float
    eta_star: float | None
    nu_star: float | None
    theta_star: float | None = None
    iterations: int = 0
    converged: bool = True
    rho_norm: float = 0.0

    @property
    def null_gradient(self) -> bool:
        return self.eta_star is None

    @property
    def s_hat_norm(self) -> float:
        return float(np.linalg.norm(self.s_hat))


def solve_subproblem(J, F: np.ndarray, M: SketchOperator, mu: float, eta: float,
                     mode: str = "exact", grad: np.ndarray | None = None,
                     max_iters: int | None = None, dense_cap: int = DENSE_CAP) -> SubproblemResult:
    """Solve ``min 0.5||J M^T s + F||^2 + 0.5 mu ||s||^2`` at fixed ``J``, ``F``.

    ``mode`` is ``"exact"`` (dense QR) or ``"lsmr"`` (inexact, forcing term
    ``eta``). ``grad`` is ``J^T F`` if already available.
    """
    if grad is None:
        grad = J.T @ F
    g_M = M.apply(grad)
    ell = M.ell
    if not np.any(g_M):
        zero = np.zeros(ell)
        return SubproblemResult(zero, np.zeros(M.n), g_M, 0.0, mu, eta, None, None)

    G = StackedOperator(J, M, mu)
    rhs = stacked_rhs(F, ell)
    if mode == "exact":
        kr: KrylovResult = exact_solve(G, rhs, cap=dense_cap)
    elif mode == "lsmr":
        kr = lsmr_solve(G, rhs, eta, max_iters=max_iters)
    else:
        raise ValueError(f"unknown subproblem mode {mode!r}")

    s_hat = kr.s_hat
    s = M.apply_transpose(s_hat)
    # eta*, nu* recomputed from the returned step, independent of the solver
    model_grad = M.apply(J.T @ (J @ s))
    g_norm = float(np.linalg.norm(g_M))
    nu_star = float(np.linalg.norm(model_grad + g_M)) / g_norm
    eta_star = float(np.linalg.norm(model_grad + mu * s_hat + g_M)) / g_norm
    return SubproblemResult(
        s_hat=s_hat,
        s=s,
        sketched_gradient=g_M,
        directional_derivative=float(s @ grad),
        mu=mu,
        eta=eta,
        eta_star=eta_star,
        nu_star=nu_star,
        iterations=kr.iterations,
        converged=kr.converged,
        rho_norm=kr.rho_norm,
    )


def build_and_solve(problem: NlsProblem, x, M: SketchOperator, mu: float, eta: float,
                    mode: str = "exact", **kwargs) -> SubproblemResult:
    F = problem.residual(x)
    J = problem.jacobian(x)
    return solve_subproblem(J, F, M, mu, eta, mode=mode, **kwargs)


def theta_star_from(J, F: np.ndarray, s: np.ndarray, grad: np.ndarray | None = None) -> float | None:
    """``||J^T (J s + F)|| / ||J^T F||``; ``None`` at a stationary point."""
    if grad is None:
        grad = J.T @ F
    g_norm = float(np.linalg.norm(grad))
    if g_norm == 0.0:
        return None
    return float(np.linalg.norm(J.T @ (J @ s) + grad)) / g_norm


def theta_star(problem: NlsProblem, x, s) -> float | None:
    F = problem.residual(x)
    J = problem.jacobian(x)
    return theta_star_from(J, F, np.asarray(s, dtype=float))


def nu_bounds(lam_max: float, lam_min_nz: float, mu: float, eta_star: float) -> tuple[float, float]:
    """Lower and upper bounds on ``nu*`` in terms of the sketched Gram spectrum.

    The lower bound is only claimed for exact solves; for ``eta_star > 0``
    it is returned as 0.
    """
    upper = mu / (lam_min_nz + mu)
    if eta_star == 0.0:
        return mu / (lam_max + mu), upper
    return 0.0, upper + lam_max / (lam_max + mu) * eta_star


def check_nu_bounds(result: SubproblemResult | float, lam_max: float, lam_min_nz: float,
                    mu: float | None = None, eta_star: float | None = None,
                    rtol: float = 1e-8) -> bool:
    """Whether ``nu*`` respects its spectral bounds (relative tolerance ``rtol``)."""
    if isinstance(result, SubproblemResult):
        if result.null_gradient:
            return True
        nu = result.nu_star
        mu = result.mu if mu is None else mu
        eta_star = result.eta_star if eta_star is None else eta_star
    else:
        nu = float(result)
    lo, hi = nu_bounds(lam_max, lam_min_nz, mu, eta_star)
    return lo * (1.0 - rtol) <= nu <= hi * (1.0 + rtol)


def step_norm_bound(lam_min_nz: float, mu: float, eta: float, g_M_norm: float) -> float:
    """Upper bound ``(1/(lam_r + mu) + eta/mu) ||M grad||`` on ``||s_hat||``."""
    return (1.0 / (lam_min_nz + mu) + eta / mu) * g_M_norm


def descent_holds(result: SubproblemResult, rtol: float = 1e-10) -> bool:
    """``s^T grad <= -mu ||s_hat||^2`` up to ``rtol*(1+|s^T grad|)``."""
    dd = result.directional_derivative
    return dd <= -result.mu * result.s_hat_norm**2 + rtol * (1.0 + abs(dd))
