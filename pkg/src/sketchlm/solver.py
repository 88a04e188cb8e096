"""Sketched Levenberg-Marquardt outer iterations.

Modes
-----
``basic``
    Step search: Armijo test on ``x + t s``, steplength and sketch size
    adapted from the success flag alone.
``revised``
    As ``basic``, but after a successful step the sketch is only shrunk
    when the full Gauss-Newton residual ratio ``theta*`` is at most
    ``theta``; otherwise it grows.
``local``
    Unit steps accepted unconditionally, with ``mu_k`` and ``eta_k`` tied
    to the gradient norm; sketch size follows the ``theta*`` rule.
``llm``
    Deterministic line-search Levenberg-Marquardt: identity sketch and
    ``l = n`` at every iteration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .cost import CLASSIFICATION, GENERIC, CostLedger
from .krylov import DENSE_CAP, sketched_gram, spectral_extremes
from .problems import ClassificationProblem, EvalCounters, NlsProblem, as_dense
from .sketching import canonical_kind, draw
from .subproblem import SubproblemResult, solve_subproblem, theta_star_from

MODES = ("basic", "revised", "local", "llm")
REASONS = ("grad_tol", "max_iter", "stagnation", "stationary")


class NonFiniteError(FloatingPointError):
    """Merit became non-finite; ``outcome`` holds the trace up to that point."""

    def __init__(self, message: str, outcome: "SolveOutcome | None" = None):
        super().__init__(message)
        self.outcome = outcome


@dataclass
class SolverConfig:
    """Scalars of the step-search and local algorithms.

    Sizes left as ``None`` are resolved against the problem dimension by
    :meth:`resolve`: ``ell_min = ceil(n/10)``, ``ell_max = n`` and
    ``ell0 = ceil(l0_frac * n)`` (or ``ell_max`` when no fraction is set).
    """

    mode: str = "revised"
    sketch: str = "s-hashing"
    hashing_s: int = 1
    c: float = 1e-4
    gamma: float = 0.5
    gamma_hat_inv: float = 1.1
    t_max: float = 1.0
    t0: float | None = None
    ell_min: int | None = None
    ell_max: int | None = None
    ell0: int | None = None
    l0_frac: float | None = None
    theta: float = math.inf
    mu: float = 1e-4
    mu_min: float | None = None
    mu_max: float | None = None
    eta: float = 0.0
    eta_max: float = 0.99
    beta: float = 1.0
    eta_bar: float = 0.0
    mu_bar: float = 1.0
    subproblem: str = "auto"
    lsmr_max_iters: int | None = None
    grad_tol: float = 1e-3
    max_iter: int = 500
    seed: int = 0
    record_theta: bool = False
    diagnostics: bool = False
    diag_eps: float = 0.5
    store_iterates: bool = False
    stagnation_iters: int = 20
    stagnation_t: float = 1e-16
    dense_cap: int = DENSE_CAP

    def resolve(self, n: int) -> "SolverConfig":
        """Fill defaults that depend on ``n`` and validate every range."""
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        cfg = replace(self)
        if cfg.mode == "llm":
            cfg.sketch = "identity"
            cfg.ell_min = cfg.ell_max = cfg.ell0 = n
        else:
            cfg.sketch = canonical_kind(cfg.sketch)
        if cfg.ell_max is None:
            cfg.ell_max = n
        if cfg.ell_min is None:
            cfg.ell_min = min(math.ceil(n / 10), cfg.ell_max)
        if cfg.ell0 is None:
            cfg.ell0 = cfg.ell_max if cfg.l0_frac is None else math.ceil(cfg.l0_frac * n)
            cfg.ell0 = min(max(cfg.ell0, cfg.ell_min), cfg.ell_max)
        if cfg.t0 is None:
            cfg.t0 = cfg.t_max
        if cfg.mu_min is None:
            cfg.mu_min = cfg.mu if cfg.mode != "local" else 0.0
        if cfg.mu_max is None:
            cfg.mu_max = cfg.mu if cfg.mode != "local" else math.inf
        cfg._validate(n)
        return cfg

    def _validate(self, n: int) -> None:
        def need(cond, msg):
            if not cond:
                raise ValueError(msg)

        need(0 < self.c < 1, "c must be in (0, 1)")
        need(0 < self.gamma < 1, "gamma must be in (0, 1)")
        need(self.gamma_hat_inv > 1, "gamma_hat_inv must exceed 1")
        need(self.t_max > 0 and 0 < self.t0 <= self.t_max, "need 0 < t0 <= t_max")
        need(1 <= self.ell_min <= self.ell_max <= n, "need 1 <= ell_min <= ell_max <= n")
        need(self.ell_min <= self.ell0 <= self.ell_max, "ell0 outside [ell_min, ell_max]")
        need(self.theta > 0, "theta must be positive (inf disables the test)")
        need(0 <= self.eta_max < 1, "eta_max must be in [0, 1)")
        need(self.grad_tol >= 0 and self.max_iter >= 0, "grad_tol and max_iter must be nonnegative")
        need(self.subproblem in ("auto", "exact", "lsmr"), "subproblem must be auto, exact or lsmr")
        if self.mode == "local":
            need(0 <= self.beta <= 1, "beta must be in [0, 1]")
            need(self.mu_bar > 0 and self.eta_bar >= 0, "need mu_bar > 0 and eta_bar >= 0")
        else:
            need(self.mu > 0, "mu must be positive")
            need(self.mu_min <= self.mu <= self.mu_max, "mu outside [mu_min, mu_max]")
            need(0 <= self.eta <= self.eta_max, "eta outside [0, eta_max]")

    @property
    def uses_theta(self) -> bool:
        return self.mode in ("revised", "local") or self.record_theta

    def solve_mode(self) -> str:
        if self.subproblem != "auto":
            return self.subproblem
        eta = self.eta_bar if self.mode == "local" else self.eta
        return "exact" if eta == 0.0 else "lsmr"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class IterationRecord:
    """One row of the solver trace, describing iteration ``k`` at ``x_k``."""

    k: int
    f: float
    gnorm: float
    ell: int
    t: float
    eta_star: float | None
    nu_star: float | None
    theta_star: float | None
    success: bool
    lsmr_iters: int
    iter_cost: int
    cum_cost: int
    # diagnostic payload
    mu: float = 0.0
    eta: float = 0.0
    dir_deriv: float = 0.0
    shat_norm: float = 0.0
    f_trial: float = math.nan
    null_gradient: bool = False
    lsmr_converged: bool = True
    lam_max: float | None = None
    lam_min: float | None = None
    grad_embedded: bool | None = None
    subspace_embedded: bool | None = None


@dataclass
class SolveOutcome:
    x: np.ndarray
    reason: str
    trace: list[IterationRecord]
    counters: EvalCounters
    f: float
    gnorm: float
    config: SolverConfig
    total_cost: int = 0
    iterates: list[np.ndarray] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace)


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    F: np.ndarray
    J: object
    grad: np.ndarray
    f: float
    gnorm: float
    t: float
    ell: int
    stall: int = 0


def shrink_ell(ell: int, ell_min: int, gamma_hat_inv: float) -> int:
    """``max(ell_min, floor(ell / gamma_hat_inv))``, moving by at least one."""
    new = math.floor(ell / gamma_hat_inv)
    if new >= ell:
        new = ell - 1
    return max(ell_min, new)


def grow_ell(ell: int, ell_max: int, gamma_hat_inv: float) -> int:
    """``min(ell_max, floor(ell * gamma_hat_inv))``, moving by at least one."""
    new = math.floor(ell * gamma_hat_inv)
    if new <= ell:
        new = ell + 1
    return min(ell_max, new)


def revised_size_update(success: bool, theta_star: float | None, theta: float,
                        ell: int, config: SolverConfig) -> int:
    """Next sketch size: shrink only after a success with ``theta* <= theta``."""
    shrink = success and (math.isinf(theta) or (theta_star is not None and theta_star <= theta))
    if shrink:
        return shrink_ell(ell, config.ell_min, config.gamma_hat_inv)
    return grow_ell(ell, config.ell_max, config.gamma_hat_inv)


def next_steplength(success: bool, t: float, config: SolverConfig) -> float:
    return min(config.t_max, t / config.gamma) if success else config.gamma * t


def armijo(f_old: float, f_trial: float, t: float, dir_deriv: float, c: float) -> bool:
    """``f(x + t s) < f(x) + c t s^T grad``; non-finite trials fail."""
    return bool(np.isfinite(f_trial) and f_trial < f_old + c * t * dir_deriv)


def local_parameters(gnorm: float, config: SolverConfig) -> tuple[float, float]:
    """``(mu_k, eta_k)`` from the gradient-norm schedule.

    Both are ``bar * gnorm**beta`` for ``beta in (0, 1]``; ``beta = 0``
    uses exponent one. ``eta_k`` is clipped to ``eta_max`` and ``mu_k`` to
    ``[mu_min, mu_max]``.
    """
    power = gnorm if config.beta == 0 else gnorm**config.beta
    mu = min(max(config.mu_bar * power, config.mu_min or 0.0), config.mu_max)
    eta = min(config.eta_bar * power, config.eta_max)
    return mu, eta


def _sketch_seed(seed: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(k,))


def _draw_sketch(config: SolverConfig, ell: int, n: int, k: int):
    if config.sketch == "identity":
        return draw("identity", n, n)
    return draw(config.sketch, ell, n, seed=_sketch_seed(config.seed, k), s=config.hashing_s)


def _problem_class(problem: NlsProblem) -> str:
    return CLASSIFICATION if isinstance(problem, ClassificationProblem) else GENERIC


def _evaluate(problem: NlsProblem, x: np.ndarray, F: np.ndarray | None = None):
    if F is None:
        F = problem.residual(x)
    J = problem.jacobian(x)
    g = J.T @ F
    return F, J, g, 0.5 * float(F @ F), float(np.linalg.norm(g))


def _attach_diagnostics(rec: IterationRecord, state: SolverState, M, config: SolverConfig) -> None:
    """Spectral and embedding checks; skipped above the densification cap."""
    from .diagnostics import check_subspace_embedding, check_vector_embedding

    if M.ell > config.dense_cap or M.n > config.dense_cap:
        return
    Jd = as_dense(state.J)
    ext = spectral_extremes(sketched_gram(Jd, M), cap=config.dense_cap)
    rec.lam_max, rec.lam_min = ext.lam_max, ext.lam_min_nonzero
    if state.gnorm > 0.0:
        rec.grad_embedded = check_vector_embedding(M, state.grad, config.diag_eps)
    rec.subspace_embedded = check_subspace_embedding(M, Jd.T, config.diag_eps).subspace_ok


def _solve_at(state: SolverState, M, mu: float, eta: float, config: SolverConfig) -> SubproblemResult:
    max_iters = config.lsmr_max_iters
    return solve_subproblem(state.J, state.F, M, mu, eta, mode=config.solve_mode(),
                            grad=state.grad, max_iters=max_iters, dense_cap=config.dense_cap)


def _record(state: SolverState, sub: SubproblemResult, theta: float | None, success: bool,
            cost: int, cum: int, mu: float, eta: float, f_trial: float) -> IterationRecord:
    return IterationRecord(
        k=state.k, f=state.f, gnorm=state.gnorm, ell=state.ell, t=state.t,
        eta_star=sub.eta_star, nu_star=sub.nu_star, theta_star=theta, success=success,
        lsmr_iters=sub.iterations, iter_cost=cost, cum_cost=cum,
        mu=mu, eta=eta, dir_deriv=sub.directional_derivative, shat_norm=sub.s_hat_norm,
        f_trial=f_trial, null_gradient=sub.null_gradient, lsmr_converged=sub.converged,
    )


class _Run:
    """Mutable context for one solve: problem, ledger and resolved config."""

    def __init__(self, problem: NlsProblem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.ledger = CostLedger(problem.m, problem.n, _problem_class(problem))

    def charge(self, ell: int, q: int) -> int:
        return self.ledger.charge(self.config.solve_mode(), ell, q)


def _theta(run: _Run, state: SolverState, sub: SubproblemResult) -> float | None:
    if not run.config.uses_theta:
        return None
    return theta_star_from(state.J, state.F, sub.s, grad=state.grad)


def step_search_iteration(run: _Run, state: SolverState) -> tuple[SolverState, IterationRecord]:
    """One iteration of the step-search algorithm (``basic``, ``revised`` or ``llm``)."""
    cfg, problem = run.config, run.problem
    M = _draw_sketch(cfg, state.ell, problem.n, state.k)
    mu, eta = cfg.mu, cfg.eta
    sub = _solve_at(state, M, mu, eta, cfg)
    theta = _theta(run, state, sub)

    f_trial = math.nan
    F_trial = None
    success = False
    if not sub.null_gradient:
        x_trial = state.x + state.t * sub.s
        F_trial = problem.residual(x_trial)
        f_trial = 0.5 * float(F_trial @ F_trial)
        success = armijo(state.f, f_trial, state.t, sub.directional_derivative, cfg.c)

    cost = run.charge(state.ell, sub.iterations)
    rec = _record(state, sub, theta, success, cost, run.ledger.total, mu, eta, f_trial)
    if cfg.diagnostics:
        _attach_diagnostics(rec, state, M, cfg)

    if cfg.mode == "revised":
        ell_next = revised_size_update(success, theta, cfg.theta, state.ell, cfg)
    elif cfg.mode == "llm":
        ell_next = state.ell
    else:
        ell_next = revised_size_update(success, None, math.inf, state.ell, cfg)
    t_next = next_steplength(success, state.t, cfg)

    if success:
        x = state.x + state.t * sub.s
        F, J, g, f, gnorm = _evaluate(problem, x, F_trial)
        new = SolverState(state.k + 1, x, F, J, g, f, gnorm, t_next, ell_next, stall=0)
    else:
        stall = state.stall + 1 if state.t < cfg.stagnation_t else 0
        new = replace(state, k=state.k + 1, t=t_next, ell=ell_next, stall=stall)
    return new, rec


def slm_local_iteration(run: _Run, state: SolverState) -> tuple[SolverState, IterationRecord]:
    """One unit-step iteration with gradient-norm parameter schedules."""
    cfg, problem = run.config, run.problem
    M = _draw_sketch(cfg, state.ell, problem.n, state.k)
    mu, eta = local_parameters(state.gnorm, cfg)
    sub = _solve_at(state, M, mu, eta, cfg)
    theta = _theta(run, state, sub)

    x = state.x + sub.s
    F, J, g, f, gnorm = _evaluate(problem, x)
    cost = run.charge(state.ell, sub.iterations)
    rec = _record(state, sub, theta, True, cost, run.ledger.total, mu, eta, f)
    if cfg.diagnostics:
        _attach_diagnostics(rec, state, M, cfg)
    ell_next = state.ell if cfg.sketch == "identity" else revised_size_update(True, theta, cfg.theta, state.ell, cfg)
    return SolverState(state.k + 1, x, F, J, g, f, gnorm, 1.0, ell_next), rec


def solve(problem: NlsProblem, config: SolverConfig | None = None, x0=None) -> SolveOutcome:
    """Run the configured algorithm from ``x0`` (default ``problem.default_start()``).

    Stops when ``||grad f|| < grad_tol``, after ``max_iter`` iterations, or
    after ``stagnation_iters`` consecutive failures with ``t < stagnation_t``.
    A non-finite merit at ``x0`` (or, in ``local`` mode, at any accepted
    iterate) raises :class:`NonFiniteError` carrying the partial outcome.
    """
    cfg = (config or SolverConfig()).resolve(problem.n)
    run = _Run(problem, cfg)
    x = np.array(problem.default_start() if x0 is None else x0, dtype=float)
    trace: list[IterationRecord] = []
    iterates: list[np.ndarray] = []

    def outcome(state: SolverState, reason: str) -> SolveOutcome:
        return SolveOutcome(state.x, reason, trace, problem.counters, state.f, state.gnorm,
                            cfg, run.ledger.total, iterates)

    F, J, g, f, gnorm = _evaluate(problem, x)
    t0 = 1.0 if cfg.mode == "local" else cfg.t0
    state = SolverState(0, x, F, J, g, f, gnorm, t0, cfg.ell0)
    if not np.isfinite(f):
        raise NonFiniteError("merit is not finite at the starting point", outcome(state, "max_iter"))

    step = slm_local_iteration if cfg.mode == "local" else step_search_iteration
    while True:
        if cfg.store_iterates:
            iterates.append(state.x.copy())
        if state.gnorm < cfg.grad_tol:
            return outcome(state, "grad_tol")
        if state.gnorm == 0.0:
            return outcome(state, "stationary")
        if state.k >= cfg.max_iter:
            return outcome(state, "max_iter")
        if state.stall >= cfg.stagnation_iters:
            return outcome(state, "stagnation")
        state, rec = step(run, state)
        trace.append(rec)
        if not np.isfinite(state.f):
            raise NonFiniteError(f"merit became non-finite at iteration {state.k}", outcome(state, "max_iter"))


def hitting_time(outcome: SolveOutcome, tau: float) -> int | None:
    """First ``k`` with ``||grad f(x_k)|| <= tau``, or ``None`` if never reached."""
    for rec in outcome.trace:
        if rec.gnorm <= tau:
            return rec.k
    if outcome.gnorm <= tau:
        return outcome.iterations
    return None
