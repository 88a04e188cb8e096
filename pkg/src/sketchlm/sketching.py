"""Random sketching matrices ``M in R^{l x n}``.

Supported ensembles: scaled Gaussian, s-hashing, stable 1-hashing, scaled
sampling, and the identity (``l = n``, used for the deterministic
baseline). Sparse kinds are stored as index/sign arrays and applied through
a CSR matrix, so products cost ``O(nnz)`` and nothing dense is formed.

Draws use a Philox (counter-based) generator, so a given seed yields the
same matrix on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

KINDS = ("gaussian", "s-hashing", "stable-1-hashing", "sampling", "identity")

_ALIASES = {
    "scaled-gaussian": "gaussian",
    "1-hashing": "s-hashing",
    "hashing": "s-hashing",
    "stable-hashing": "stable-1-hashing",
    "scaled-sampling": "sampling",
}


def canonical_kind(kind: str) -> str:
    k = kind.lower()
    k = _ALIASES.get(k, k)
    if k not in KINDS:
        raise ValueError(f"unknown sketch kind {kind!r}; expected one of {KINDS}")
    return k


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class SketchOperator:
    """An ``l x n`` random matrix with forward and transpose products.

    ``rows``/``signs`` hold, per column, the row indices and signs of the
    nonzeros for the hashing kinds (shape ``(n, s)`` for s-hashing, ``(n,)``
    for stable 1-hashing). ``cols`` holds the sampled column of each row for
    scaled sampling. ``dense`` is only populated for the Gaussian kind.
    """

    kind: str
    ell: int
    n: int
    s: int = 1
    seed: object = None
    rows: np.ndarray | None = None
    signs: np.ndarray | None = None
    cols: np.ndarray | None = None
    dense: np.ndarray | None = None
    _csr: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ell, self.n)

    @property
    def nnz(self) -> int:
        if self.kind == "gaussian":
            return self.ell * self.n
        if self.kind == "identity":
            return self.n
        return self._csr.nnz

    def apply(self, y: np.ndarray) -> np.ndarray:
        """``M @ y`` for a vector or a matrix with ``n`` rows."""
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.n:
            raise ValueError(f"sketch expects leading dimension {self.n}, got {y.shape[0]}")
        if self.kind == "identity":
            return y.copy()
        if self.kind == "gaussian":
            return self.dense @ y
        return self._csr @ y

    def apply_transpose(self, z: np.ndarray) -> np.ndarray:
        """``M.T @ z`` for a vector or a matrix with ``l`` rows."""
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.ell:
            raise ValueError(f"sketch transpose expects leading dimension {self.ell}, got {z.shape[0]}")
        if self.kind == "identity":
            return z.copy()
        if self.kind == "gaussian":
            return self.dense.T @ z
        return self._csr.T @ z

    def __matmul__(self, y):
        return self.apply(y)

    def todense(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "gaussian":
            return self.dense.copy()
        return self._csr.toarray()


def _distinct_rows(rng: np.random.Generator, n: int, ell: int, s: int) -> np.ndarray:
    """``n`` independent uniform ``s``-subsets of ``range(ell)``, one per row of the result."""
    if s == 1:
        return rng.integers(0, ell, size=(n, 1))
    if 2 * s > ell:
        return np.stack([rng.choice(ell, size=s, replace=False) for _ in range(n)])
    # i.i.d. tuples conditioned on distinctness are uniform over s-subsets
    rows = rng.integers(0, ell, size=(n, s))
    while True:
        srt = np.sort(rows, axis=1)
        bad = np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))
        if bad.size == 0:
            return rows
        rows[bad] = rng.integers(0, ell, size=(bad.size, s))


def draw(kind: str, ell: int, n: int, seed=None, s: int = 1) -> SketchOperator:
    """Sample a sketching matrix of the given ensemble.

    Parameters
    ----------
    kind : str
        One of ``gaussian``, ``s-hashing`` (``1-hashing`` is an alias with
        ``s=1``), ``stable-1-hashing``, ``sampling``, ``identity``.
    ell, n : int
        Sketch dimensions. The hashing and sampling kinds need ``ell <= n``.
    seed : int, SeedSequence or Generator
        Source of randomness; integer and SeedSequence seeds are reproducible.
    s : int
        Nonzeros per column for s-hashing.
    """
    kind = canonical_kind(kind)
    ell, n = int(ell), int(n)
    if ell < 1 or n < 1:
        raise ValueError("sketch dimensions must be positive")

    if kind == "identity":
        if ell != n:
            raise ValueError("identity sketch requires ell == n")
        return SketchOperator("identity", n, n, seed=seed)

    if kind != "gaussian" and ell > n:
        raise ValueError(f"{kind} sketch requires ell <= n (got ell={ell}, n={n})")

    rng = make_rng(seed)

    if kind == "gaussian":
        dense = rng.standard_normal((ell, n)) / math.sqrt(ell)
        return SketchOperator("gaussian", ell, n, seed=seed, dense=dense)

    if kind == "s-hashing":
        if not 1 <= s <= ell:
            raise ValueError("s-hashing requires 1 <= s <= ell")
        rows = _distinct_rows(rng, n, ell, s)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(n, s))
        cols = np.repeat(np.arange(n), s)
        csr = sp.csr_matrix((signs.ravel() / math.sqrt(s), (rows.ravel(), cols)), shape=(ell, n))
        return SketchOperator("s-hashing", ell, n, s=s, seed=seed, rows=rows, signs=signs, _csr=csr)

    if kind == "stable-1-hashing":
        copies = math.ceil(n / ell)
        pool = np.tile(np.arange(ell), copies)
        rows = rng.permutation(pool)[:n]
        signs = rng.choice(np.array([-1.0, 1.0]), size=n)
        csr = sp.csr_matrix((signs, (rows, np.arange(n))), shape=(ell, n))
        return SketchOperator("stable-1-hashing", ell, n, seed=seed, rows=rows, signs=signs, _csr=csr)

    # scaled sampling: distinct columns, one per row
    cols = rng.choice(n, size=ell, replace=False)
    vals = np.full(ell, math.sqrt(n / ell))
    csr = sp.csr_matrix((vals, (np.arange(ell), cols)), shape=(ell, n))
    return SketchOperator("sampling", ell, n, seed=seed, cols=cols, _csr=csr)


def operator_norm_bound(M: SketchOperator, delta2: float | None = None) -> float:
    """The ensemble's bound ``M_max`` on ``||M||_2``.

    Deterministic for the sparse kinds; for Gaussian matrices the bound
    holds with probability ``1 - delta2`` and ``delta2`` must be given.
    """
    n, ell = M.n, M.ell
    if M.kind == "identity":
        return 1.0
    if M.kind == "s-hashing":
        return math.sqrt(n / M.s)
    if M.kind == "stable-1-hashing":
        return math.sqrt(math.ceil(n / ell))
    if M.kind == "sampling":
        return math.sqrt(n / ell)
    if delta2 is None or not 0.0 < delta2 < 1.0:
        raise ValueError("Gaussian operator-norm bound needs delta2 in (0, 1)")
    return 1.0 + math.sqrt(n / ell) + math.sqrt(2.0 * math.log(1.0 / delta2) / ell)


def _ceil(v: float) -> int:
    # absorb round-off such as 4/(1-1e-12)**2
    return math.ceil(v - 1e-9 * abs(v))


@dataclass
class EnsembleParams:
    """Parameters relating sketch size, distortion and failure probabilities."""

    kind: str
    eps: float
    delta1: float
    delta2: float
    m_max: float | None
    ell: int

    def __post_init__(self):
        if not (self.eps > 0 and self.delta1 > 0 and self.delta2 >= 0):
            raise ValueError("ensemble parameters must be positive")

    @property
    def delta(self) -> float:
        """``delta_M = delta1 + delta2`` (probability that an iteration is not true)."""
        return self.delta1 + self.delta2


def _check_eps(kind: str, eps: float) -> None:
    lo, hi = (0.25, 0.75) if kind == "stable-1-hashing" else (0.0, 1.0)
    if not lo < eps < hi:
        raise ValueError(f"eps={eps} outside ({lo}, {hi}) for {kind}")


def recommended_ell(kind: str, eps: float, delta1: float, *, n: int | None = None,
                    nu: float = 1.0, C1: float = 4.0, C3: float = 4.0) -> int:
    """Sketch size for a one-sided embedding of a fixed vector with distortion ``eps``
    and failure probability ``delta1``.

    Gaussian: ``4/eps^2 log(1/delta1)``; s-hashing: ``C1/eps^2 log(1/delta1)``;
    stable 1-hashing: ``C3/(eps-1/4)^2 log(1/delta1)``; sampling:
    ``2 n nu^2 / eps^2 log(1/delta1)``. The result is rounded up.
    """
    kind = canonical_kind(kind)
    if not 0.0 < delta1 < 1.0:
        raise ValueError("delta1 must be in (0, 1)")
    if kind == "identity":
        raise ValueError("identity sketch has no size recommendation")
    _check_eps(kind, eps)
    log_term = math.log(1.0 / delta1)
    if kind == "gaussian":
        return _ceil(4.0 / eps**2 * log_term)
    if kind == "s-hashing":
        return _ceil(C1 / eps**2 * log_term)
    if kind == "stable-1-hashing":
        return _ceil(C3 / (eps - 0.25) ** 2 * log_term)
    if n is None:
        raise ValueError("sampling sketch size needs n")
    return _ceil(2.0 * n * nu**2 / eps**2 * log_term)


def ensemble_params(kind: str, ell: int, n: int, eps: float, *, s: int = 1,
                    delta2: float | None = None, nu: float = 1.0, C1: float = 4.0) -> EnsembleParams:
    """Failure probabilities and ``M_max`` for a sketch of size ``ell``."""
    kind = canonical_kind(kind)
    _check_eps(kind, eps)
    if kind == "gaussian":
        d1 = math.exp(-eps**2 * ell / 4.0)
        if delta2 is None:
            raise ValueError("Gaussian ensemble needs delta2")
        m_max = 1.0 + math.sqrt(n / ell) + math.sqrt(2.0 * math.log(1.0 / delta2) / ell)
        return EnsembleParams(kind, eps, d1, delta2, m_max, ell)
    if kind == "s-hashing":
        return EnsembleParams(kind, eps, math.exp(-eps**2 * ell / C1), 0.0, math.sqrt(n / s), ell)
    if kind == "stable-1-hashing":
        d1 = math.exp(-((eps - 0.25) ** 2) * ell / C1)
        return EnsembleParams(kind, eps, d1, 0.0, math.sqrt(math.ceil(n / ell)), ell)
    if kind == "sampling":
        d1 = math.exp(-eps**2 * ell / (2.0 * n * nu**2))
        return EnsembleParams(kind, eps, d1, 0.0, math.sqrt(n / ell), ell)
    raise ValueError("identity sketch has no ensemble parameters")
