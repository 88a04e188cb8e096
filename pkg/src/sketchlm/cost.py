"""Integer operation counts charged per solver iteration.

Each iteration is charged for one residual evaluation, one Jacobian
evaluation, the products ``J^T F`` and ``J^T J s`` (``3mn`` together) and
the subproblem solve: ``2 m l^2 + l^2`` for a dense QR factorisation,
``2 m l q`` for ``q`` LSMR iterations. For the classification residual the
Jacobian is a row scaling of the data matrix reused from the residual, so
the residual is charged ``mn`` and the Jacobian nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

GENERIC = "generic"
CLASSIFICATION = "classification"


def _check_nonneg(**values: int) -> None:
    for name, v in values.items():
        if v < 0:
            raise ValueError(f"{name} must be nonnegative, got {v}")


def event_charges(mode: str, m: int, n: int, ell: int, q: int = 0,
                  problem_class: str = GENERIC, sketch_nnz: int | None = None) -> dict[str, int]:
    """Per-event breakdown of one iteration's cost.

    ``sketch_nnz``, when given, adds ``2 * nnz(M)`` for forming ``M g`` and
    ``M^T s``; the default charges sketch application nothing.
    """
    _check_nonneg(m=m, n=n, ell=ell, q=q)
    m, n, ell, q = int(m), int(n), int(ell), int(q)
    if problem_class == GENERIC:
        residual, jacobian = m, m * n
    elif problem_class == CLASSIFICATION:
        residual, jacobian = m * n, 0
    else:
        raise ValueError(f"unknown problem class {problem_class!r}")
    if mode == "exact":
        solve = 2 * m * ell * ell + ell * ell
    elif mode == "lsmr":
        solve = 2 * m * ell * q
    else:
        raise ValueError(f"unknown solve mode {mode!r}")
    charges = {"residual": residual, "jacobian": jacobian, "products": 3 * m * n, "solve": solve}
    if sketch_nnz is not None:
        charges["sketch"] = 2 * int(sketch_nnz)
    return charges


def charge_iteration(mode: str, m: int, n: int, ell: int, q: int = 0,
                     problem_class: str = GENERIC, sketch_nnz: int | None = None) -> int:
    """Total cost of one iteration.

    >>> charge_iteration("exact", m=500, n=1000, ell=100)
    12010500
    >>> charge_iteration("lsmr", m=6000, n=5000, ell=500, q=10, problem_class="classification")
    180000000
    """
    return sum(event_charges(mode, m, n, ell, q, problem_class, sketch_nnz).values())


@dataclass
class CostLedger:
    """Running total of iteration charges with a per-iteration breakdown."""

    m: int
    n: int
    problem_class: str = GENERIC
    charge_sketch: bool = False
    total: int = 0
    history: list[dict[str, int]] = field(default_factory=list)

    def charge(self, mode: str, ell: int, q: int = 0, sketch_nnz: int | None = None) -> int:
        nnz = sketch_nnz if self.charge_sketch else None
        if self.charge_sketch and nnz is None:
            raise ValueError("ledger charges sketch application but no nnz was given")
        charges = event_charges(mode, self.m, self.n, ell, q, self.problem_class, nnz)
        cost = sum(charges.values())
        self.history.append(charges)
        self.total += cost
        return cost

    def per_iteration(self) -> list[int]:
        return [sum(c.values()) for c in self.history]
