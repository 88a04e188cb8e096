"""Post-hoc audits of solver traces and local convergence-rate checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .solver import (
    IterationRecord,
    SolveOutcome,
    SolverConfig,
    armijo,
    next_steplength,
    revised_size_update,
    solve,
)
from .subproblem import check_nu_bounds


@dataclass(frozen=True)
class AuditTolerances:
    descent_rtol: float = 1e-10
    nu_rtol: float = 1e-8
    sandwich_rtol: float = 1e-8
    t_rtol: float = 1e-12


@dataclass
class Violation:
    k: int
    check: str
    detail: str


@dataclass
class AuditReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_check(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for v in self.violations:
            counts[v.check] = counts.get(v.check, 0) + 1
        return counts

    def summary(self) -> str:
        if self.ok:
            return f"audit: {self.checked} iterations, no violations"
        parts = ", ".join(f"{k}={n}" for k, n in sorted(self.by_check().items()))
        return f"audit: {self.checked} iterations, {len(self.violations)} violations ({parts})"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "check", "detail"])
            for v in self.violations:
                w.writerow([v.k, v.check, v.detail])


def audit_trace(trace: list[IterationRecord] | SolveOutcome, config: SolverConfig | None = None,
                n: int | None = None, final_f: float | None = None,
                tolerances: AuditTolerances | None = None) -> AuditReport:
    """Re-verify a recorded trace against the algorithm's rules.

    Checks, per iteration: the descent inequality ``s^T g <= -mu ||s_hat||^2``;
    that the success flag agrees with the Armijo test on the recorded
    values; that the next recorded ``f`` is the trial value after a success
    and unchanged after a failure; monotone ``f``; replay of the ``t`` and
    ``l`` update rules; and, where spectral data were recorded, the ``nu*``
    bounds and the ``theta*``/``nu*`` sandwich on embedding-verified
    iterations.

    ``config`` must be resolved (or ``n`` supplied to resolve it). Passing a
    :class:`SolveOutcome` supplies all three.
    """
    if isinstance(trace, SolveOutcome):
        config = config or trace.config
        final_f = trace.f if final_f is None else final_f
        trace = trace.trace
    if config is None:
        raise ValueError("audit needs the solver configuration")
    if config.ell_min is None:
        if n is None:
            raise ValueError("unresolved configuration: pass n")
        config = config.resolve(n)
    tol = tolerances or AuditTolerances()
    report = AuditReport(checked=len(trace))
    bad = report.violations
    local = config.mode == "local"
    eps = config.diag_eps
    sandwich = math.sqrt((1.0 + eps) / (1.0 - eps))

    for i, rec in enumerate(trace):
        nxt = trace[i + 1] if i + 1 < len(trace) else None
        dd = rec.dir_deriv
        if not rec.null_gradient:
            limit = -rec.mu * rec.shat_norm**2 + tol.descent_rtol * (1.0 + abs(dd))
            if dd > limit:
                bad.append(Violation(rec.k, "descent", f"s^T g={dd:.6e} > {limit:.6e}"))

        if not local:
            expected = False if rec.null_gradient else armijo(rec.f, rec.f_trial, rec.t, dd, config.c)
            if expected != rec.success:
                bad.append(Violation(rec.k, "armijo", f"recorded {rec.success}, test gives {expected}"))
        elif rec.t != 1.0:
            bad.append(Violation(rec.k, "t_update", f"local mode uses t=1, recorded {rec.t}"))

        f_next = nxt.f if nxt is not None else final_f
        if f_next is not None and not local:
            want = rec.f_trial if rec.success else rec.f
            if f_next != want:
                bad.append(Violation(rec.k, "next_f", f"next f={f_next!r}, expected {want!r}"))
            if f_next > rec.f:
                bad.append(Violation(rec.k, "monotone_f", f"f rose from {rec.f:.6e} to {f_next:.6e}"))

        if nxt is not None:
            if not local:
                t_want = next_steplength(rec.success, rec.t, config)
                if abs(nxt.t - t_want) > tol.t_rtol * t_want:
                    bad.append(Violation(rec.k, "t_update", f"t {rec.t} -> {nxt.t}, rule gives {t_want}"))
            ell_want = _expected_ell(rec, config)
            if nxt.ell != ell_want:
                bad.append(Violation(rec.k, "ell_update", f"ell {rec.ell} -> {nxt.ell}, rule gives {ell_want}"))

        if rec.lam_max is not None and not rec.null_gradient:
            if not check_nu_bounds(rec.nu_star, rec.lam_max, rec.lam_min, rec.mu, rec.eta_star, rtol=tol.nu_rtol):
                bad.append(Violation(rec.k, "nu_bounds", f"nu*={rec.nu_star:.6e} outside spectral bounds"))
        if rec.subspace_embedded and rec.theta_star is not None and rec.nu_star is not None:
            lo = rec.nu_star / sandwich * (1.0 - tol.sandwich_rtol)
            hi = rec.nu_star * sandwich * (1.0 + tol.sandwich_rtol)
            if not lo <= rec.theta_star <= hi:
                bad.append(Violation(rec.k, "sandwich", f"theta*={rec.theta_star:.6e} not in [{lo:.6e}, {hi:.6e}]"))
    return report


def _expected_ell(rec: IterationRecord, config: SolverConfig) -> int:
    if config.mode == "llm" or (config.mode == "local" and config.sketch == "identity"):
        return rec.ell
    if config.mode in ("revised", "local"):
        return revised_size_update(rec.success, rec.theta_star, config.theta, rec.ell, config)
    return revised_size_update(rec.success, None, math.inf, rec.ell, config)


@dataclass
class RateFit:
    distances: list[float]
    order: float
    window: int


def resolved(distances, floor: float = 0.0) -> np.ndarray:
    """Distances up to (excluding) the first one at or below the round-off ``floor``."""
    d = np.asarray(distances, dtype=float)
    if floor <= 0.0:
        return d
    below = np.flatnonzero(d <= floor)
    return d[: below[0]] if below.size else d


def fit_local_rate(distances, window: int = 4, floor: float = 0.0) -> RateFit:
    """Least-squares slope of ``log d_{k+1}`` against ``log d_k`` over the last ``window`` distances.

    Distances at or below ``floor`` (e.g. a multiple of machine precision
    times ``||x*||``) are numerically unresolved and dropped first.
    """
    d = resolved(distances, floor)
    if window < 3:
        raise ValueError("window must cover at least 3 distances")
    if d.size < max(window, 4):
        raise ValueError(f"need at least {max(window, 4)} distances, got {d.size}")
    tail = d[-window:]
    if np.any(~np.isfinite(tail)) or np.any(tail <= 0):
        raise ValueError("distances must be positive and finite")
    if np.any(np.diff(tail) >= 0):
        raise ValueError("distances must be strictly decreasing")
    logs = np.log(tail)
    slope, _ = np.polyfit(logs[:-1], logs[1:], 1)
    return RateFit(list(map(float, d)), float(slope), window)


def contraction_factors(distances, floor: float = 0.0) -> np.ndarray:
    d = resolved(distances, floor)
    return d[1:] / d[:-1]


def iterate_distances(outcome: SolveOutcome, dist_fn) -> list[float]:
    """``dist_fn`` applied to every stored iterate (requires ``store_iterates``)."""
    if not outcome.iterates:
        raise ValueError("outcome holds no iterates; solve with store_iterates=True")
    return [float(dist_fn(x)) for x in outcome.iterates]


def affine_distance(A: np.ndarray, x_star: np.ndarray):
    """Distance to ``{x : A x = A x_star}``, i.e. ``||A^+ A (x - x_star)||``."""
    pinv = np.linalg.pinv(A)
    y_star = A @ x_star

    def dist(x):
        return float(np.linalg.norm(pinv @ (A @ x - y_star)))

    return dist


@dataclass
class CampaignResult:
    runs: int
    contracted: int
    pi_hat: float
    bound: float
    margin: float

    @property
    def fraction(self) -> float:
        return self.contracted / self.runs

    @property
    def passed(self) -> bool:
        return self.fraction >= self.bound - self.margin


def local_contraction_campaign(problem, x_star, dist_fn, config: SolverConfig, *, pi_hat: float,
                               runs: int = 100, radius: float = 1e-2, steps: int = 3,
                               xi: float = 0.5, seed: int = 0) -> CampaignResult:
    """Fraction of local runs whose distance shrinks by ``xi`` at each of ``steps`` steps.

    Run ``i`` starts at ``x_star + radius * u_i`` (``u_i`` a seeded unit
    vector) and uses sketch seed ``seed + i``. The claim checked is that the
    fraction is at least ``(1 - pi_hat)^steps`` up to three binomial standard
    errors, with ``pi_hat`` the measured per-iteration embedding-failure rate.
    """
    if config.mode != "local":
        raise ValueError("campaign expects a local-mode configuration")
    rng = np.random.Generator(np.random.Philox(seed))
    x_star = np.asarray(x_star, dtype=float)
    contracted = 0
    for i in range(runs):
        u = rng.standard_normal(problem.n)
        x0 = x_star + radius * u / np.linalg.norm(u)
        cfg = replace(config, seed=seed + i, max_iter=steps, grad_tol=0.0, store_iterates=True)
        out = solve(problem.with_fresh_counters(), cfg, x0=x0)
        d = iterate_distances(out, dist_fn)
        ok = len(d) == steps + 1 and all(d[j + 1] <= xi * d[j] for j in range(steps))
        contracted += ok
    bound = (1.0 - pi_hat) ** steps
    margin = 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / runs)
    return CampaignResult(runs, contracted, pi_hat, bound, margin)
