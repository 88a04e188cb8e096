"""Empirical checks of sketch embedding properties at diagnostic scale.

The subspace test uses the economic SVD ``J^T = U S V^T``: since
``{J^T z}`` is exactly ``range(U)``, the two-sided condition
``(1-eps)||J^T z||^2 <= ||M J^T z||^2 <= (1+eps)||J^T z||^2`` for all ``z``
holds iff every eigenvalue of ``(M U)^T (M U)`` lies in ``[1-eps, 1+eps]``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields

import numpy as np

from .sketching import SketchOperator, draw, operator_norm_bound

SVD_RANK_RTOL = 1e-10


def _rank(sv: np.ndarray) -> int:
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > SVD_RANK_RTOL * sv[0]))


def check_vector_embedding(M: SketchOperator, y, eps: float) -> bool | None:
    """``||M y||^2 >= (1 - eps) ||y||^2``; ``None`` for ``y = 0``."""
    y = np.asarray(y, dtype=float)
    yy = float(y @ y)
    if yy == 0.0:
        return None
    My = M.apply(y)
    return bool(float(My @ My) >= (1.0 - eps) * yy)


@dataclass
class TrueIterationReport:
    eps: float
    gradient_ok: bool | None
    subspace_ok: bool
    norm_ok: bool | None
    min_distortion: float
    max_distortion: float
    rank_jt: int
    rank_mjt: int
    sigma_max_jt: float
    sigma_min_jt: float
    sigma_max_mjt: float
    sigma_min_mjt: float

    @property
    def true_iteration(self) -> bool:
        return bool(self.subspace_ok and self.norm_ok is not False)


def left_factor(Jt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of ``range(J^T)`` and the singular values of ``J^T``."""
    U, sv, _ = np.linalg.svd(np.asarray(Jt, dtype=float), full_matrices=False)
    r = _rank(sv)
    return U[:, :r], sv


def check_subspace_embedding(M: SketchOperator, Jt, eps: float, grad=None,
                             delta2: float | None = None, cap: int = 4000) -> TrueIterationReport:
    """Subspace-embedding test of ``M`` on ``range(J^T)``.

    ``grad`` (a vector in ``range(J^T)``), when given, is also checked with
    the one-sided vector test. The operator-norm flag compares a dense
    2-norm with the ensemble bound; for Gaussian sketches it needs ``delta2``
    and is ``None`` otherwise.
    """
    Jt = np.asarray(Jt, dtype=float)
    if max(Jt.shape) > cap or M.ell > cap:
        raise ValueError(f"diagnostic sizes exceed cap {cap}")
    U, sv = left_factor(Jt)
    r = U.shape[1]
    if r == 0:
        lo = hi = 1.0
    else:
        MU = M.apply(U)
        w = np.linalg.eigvalsh(MU.T @ MU)
        lo, hi = float(w[0]), float(w[-1])
    sv_m = np.linalg.svd(M.apply(Jt), compute_uv=False)
    subspace_ok = bool(1.0 - eps <= lo and hi <= 1.0 + eps)

    if M.kind == "gaussian" and delta2 is None:
        norm_ok = None
    else:
        bound = operator_norm_bound(M, delta2)
        norm_ok = bool(np.linalg.norm(M.todense(), 2) <= bound * (1.0 + 1e-12))

    gradient_ok = None if grad is None else check_vector_embedding(M, grad, eps)
    r_m = _rank(sv_m)
    return TrueIterationReport(
        eps=eps, gradient_ok=gradient_ok, subspace_ok=subspace_ok, norm_ok=norm_ok,
        min_distortion=lo, max_distortion=hi, rank_jt=r, rank_mjt=r_m,
        sigma_max_jt=float(sv[0]) if sv.size else 0.0,
        sigma_min_jt=float(sv[r - 1]) if r else 0.0,
        sigma_max_mjt=float(sv_m[0]) if sv_m.size else 0.0,
        sigma_min_mjt=float(sv_m[r_m - 1]) if r_m else 0.0,
    )


def coherence(Jt) -> float | None:
    """Largest row norm of the left singular factor of ``J^T``; ``None`` for a zero matrix."""
    U, _ = left_factor(Jt)
    if U.shape[1] == 0:
        return None
    return float(np.max(np.linalg.norm(U, axis=1)))


def monte_carlo_failure_rate(kind: str, ell: int, n: int, eps: float, trials: int,
                             y=None, Jt=None, seed: int = 0, s: int = 1) -> float:
    """Fraction of ``trials`` independent sketches that fail the embedding test.

    Exactly one of ``y`` (one-sided vector test) or ``Jt`` (two-sided
    subspace test) must be given. Trial ``i`` uses seed
    ``SeedSequence(seed, spawn_key=(i,))``.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    if (y is None) == (Jt is None):
        raise ValueError("give exactly one of y or Jt")
    failures = 0
    if y is not None:
        y = np.asarray(y, dtype=float)
        yy = float(y @ y)
    else:
        U, _ = left_factor(Jt)
    for i in range(trials):
        if kind == "identity":
            M = draw("identity", n, n)
        else:
            M = draw(kind, ell, n, seed=np.random.SeedSequence(seed, spawn_key=(i,)), s=s)
        if y is not None:
            My = M.apply(y)
            failures += float(My @ My) < (1.0 - eps) * yy
        else:
            MU = M.apply(U)
            w = np.linalg.eigvalsh(MU.T @ MU)
            failures += not (1.0 - eps <= w[0] and w[-1] <= 1.0 + eps)
    return failures / trials


def gaussian_subspace_ell(rank: int, eps: float, delta: float) -> int:
    """Smallest ``l`` for which a scaled Gaussian sketch embeds a fixed rank-``r`` subspace.

    Uses the singular-value concentration ``sqrt(l) (1 -+ sqrt(r/l)) -+ t`` of
    an ``l x r`` Gaussian matrix with ``t = sqrt(2 log(1/delta))``: both
    ``(1 + a)^2 <= 1 + eps`` and ``(1 - a)^2 >= 1 - eps`` must hold for
    ``a = (sqrt(r) + t) / sqrt(l)``, each side failing with probability at
    most ``delta``.
    """
    if rank < 1 or not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError("need rank >= 1, eps and delta in (0, 1)")
    a_max = min(np.sqrt(1.0 + eps) - 1.0, 1.0 - np.sqrt(1.0 - eps))
    t = np.sqrt(2.0 * np.log(1.0 / delta))
    return int(np.ceil(((np.sqrt(rank) + t) / a_max) ** 2))


def binomial_margin(p: float, trials: int, sigmas: float = 3.0) -> float:
    return sigmas * float(np.sqrt(p * (1.0 - p) / trials))


def write_diagnostics_csv(reports: list[TrueIterationReport], path) -> None:
    names = [f.name for f in fields(TrueIterationReport)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for rep in reports:
            row = asdict(rep)
            writer.writerow(["" if row[k] is None else row[k] for k in names])
