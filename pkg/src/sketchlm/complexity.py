"""Iteration-complexity calculator for the step-search method.

The bound combines a guaranteed decrease ``h(tau, t)`` on true successful
iterations, the steplength ``t_low`` below which true iterations always
succeed, and the number ``psi_t`` of steplength reductions before that
threshold is crossed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


@dataclass(frozen=True)
class DecreaseParams:
    """Constants entering the decrease function ``h``."""

    c: float
    mu_min: float
    mu_max: float
    eta_max: float
    eps: float
    sigma_dagger: float

    def __post_init__(self):
        if not (0 < self.c < 1 and 0 < self.mu_min <= self.mu_max):
            raise ValueError("need c in (0, 1) and 0 < mu_min <= mu_max")
        if not (0 <= self.eta_max < 1 and 0 < self.eps < 1 and self.sigma_dagger > 0):
            raise ValueError("need eta_max in [0, 1), eps in (0, 1), sigma_dagger > 0")


def h(tau: float, t: float, p: DecreaseParams) -> float:
    """``c t mu_min (1-eta_max)^2 (1-eps) tau^2 / (sigma_dagger + mu_max)^2``."""
    return (p.c * t * p.mu_min * (1.0 - p.eta_max) ** 2 * (1.0 - p.eps) * tau**2
            / (p.sigma_dagger + p.mu_max) ** 2)


def t_low(c: float, mu_min: float, L: float, M_max: float) -> float:
    """``2 (1-c) mu_min / (L M_max^2)``."""
    if L <= 0 or M_max <= 0:
        raise ValueError("L and M_max must be positive")
    return 2.0 * (1.0 - c) * mu_min / (L * M_max**2)


def psi_t(t_low_value: float, t0: float, gamma: float, reading: str = "min") -> int:
    """Steplength-reduction count ``{min|max}{1, ceil(log_gamma(t_low/t0))}``.

    ``reading="min"`` is the formula as published; ``"max"`` is the
    alternative that guarantees ``t0 gamma^psi <= min(t_low, gamma t0)``.
    """
    if not 0 < gamma < 1 or t0 <= 0 or t_low_value <= 0:
        raise ValueError("need gamma in (0, 1) and positive t0, t_low")
    k = math.ceil(math.log(t_low_value / t0) / math.log(gamma))
    if reading == "min":
        return min(1, k)
    if reading == "max":
        return max(1, k)
    raise ValueError("reading must be 'min' or 'max'")


class ComplexityBound(NamedTuple):
    N: int
    probability: float
    psi: int
    h_value: float


def success_probability(N: int, delta_M: float, delta1: float) -> float:
    return 1.0 - math.exp(-0.5 * delta1**2 * (1.0 - delta_M) * N)


def complexity_bound(delta_M: float, delta1: float, f0: float, f_star: float, tau: float,
                     t0: float, gamma: float, psi: int, params: DecreaseParams) -> ComplexityBound:
    """Smallest ``N`` meeting the hitting-time bound, with its probability.

    ``N >= [(1-delta_M)(1-delta1) - 3/4]^{-1} ((f0 - f_*)/h(tau, t0 gamma^{1+psi}) + psi/2)``
    guarantees ``P(N >= N_tau) >= 1 - exp(-delta1^2 (1-delta_M) N / 2)``.
    """
    if not 0 < delta_M < 0.25:
        raise ValueError("delta_M must lie in (0, 1/4)")
    if not 0 < delta1 < 1:
        raise ValueError("delta1 must lie in (0, 1)")
    bracket = (1.0 - delta_M) * (1.0 - delta1) - 0.75
    if bracket <= 0:
        raise ValueError("(1-delta_M)(1-delta1) must exceed 3/4")
    if f0 < f_star or tau <= 0:
        raise ValueError("need f0 >= f_star and tau > 0")
    hv = h(tau, t0 * gamma ** (1 + psi), params)
    rhs = ((f0 - f_star) / hv + psi / 2.0) / bracket
    N = max(1, math.ceil(rhs))
    return ComplexityBound(N, success_probability(N, delta_M, delta1), psi, hv)
