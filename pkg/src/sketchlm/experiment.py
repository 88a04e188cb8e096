"""Seeded batches of solver runs with CSV traces and a summary."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .datasets import classification_from_file
from .problems import BUILTIN_PROBLEMS, NlsProblem, builtin_problem, make_augmented
from .solver import IterationRecord, SolveOutcome, SolverConfig, solve

TRACE_HEADER = ["k", "f", "gnorm", "ell", "t", "eta_star", "nu_star", "theta_star",
                "success", "lsmr_iters", "iter_cost", "cum_cost"]
SUMMARY_HEADER = ["run", "seed", "reason", "iterations", "final_f", "final_gnorm",
                  "total_cost", "trace_file", "median"]


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.5e}"


@dataclass
class ExperimentSpec:
    """One batch: a problem, a solver configuration and a repetition count.

    ``problem`` is a built-in name (optionally lifted to ``n`` variables with
    augmentation seed ``aug_seed``) or ``"dataset"`` together with
    ``dataset``. Run ``i`` uses solver seed ``seed + i``.
    """

    problem: str = "broydn3d"
    d: int = 100
    n: int | None = None
    aug_seed: int = 0
    dataset: str | None = None
    val_fraction: float = 0.2
    split_seed: int = 0
    scale: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    runs: int = 1
    seed: int = 0
    out: str = "results"

    def validate(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.problem == "dataset":
            if not self.dataset:
                raise ValueError("problem 'dataset' needs a dataset path")
            if not Path(self.dataset).is_file():
                raise ValueError(f"dataset file not found: {self.dataset}")
        elif self.problem.lower() not in BUILTIN_PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(BUILTIN_PROBLEMS)} or 'dataset'")
        elif self.d < 3:
            raise ValueError("d must be >= 3")
        if self.n is not None and self.problem != "dataset" and self.n <= self.d:
            raise ValueError("augmented n must exceed the inner dimension d")

    def build_problem(self) -> NlsProblem:
        if self.problem == "dataset":
            return classification_from_file(self.dataset, self.val_fraction, self.split_seed, self.scale)
        inner = builtin_problem(self.problem, self.d)
        if self.n is None:
            return inner
        return make_augmented(inner, self.n, self.aug_seed)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        """Flat mapping: spec fields plus any :class:`SolverConfig` field names."""
        spec_names = {f.name for f in fields(cls)} - {"solver"}
        solver_names = {f.name for f in fields(SolverConfig)}
        unknown = set(data) - spec_names - solver_names
        if unknown:
            raise ValueError(f"unknown settings: {sorted(unknown)}")
        settings = {k: v for k, v in data.items() if k in solver_names and k != "seed"}
        if "theta" in settings:
            settings["theta"] = parse_theta(settings["theta"])
        solver = SolverConfig.from_dict(settings)
        spec = cls(solver=solver, **{k: v for k, v in data.items() if k in spec_names})
        return spec


def emit_trace_csv(outcome: SolveOutcome | list[IterationRecord], path) -> None:
    trace = outcome.trace if isinstance(outcome, SolveOutcome) else outcome
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in trace:
            w.writerow([r.k, _fmt(r.f), _fmt(r.gnorm), r.ell, _fmt(r.t), _fmt(r.eta_star),
                        _fmt(r.nu_star), _fmt(r.theta_star), "S" if r.success else "U",
                        r.lsmr_iters, r.iter_cost, r.cum_cost])


def read_trace_csv(path) -> list[dict]:
    """Parse a trace CSV back into typed rows (empty ratio fields become ``None``)."""
    ints = {"k", "ell", "lsmr_iters", "iter_cost", "cum_cost"}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        for raw in reader:
            row: dict = {}
            for key, val in raw.items():
                if key == "success":
                    row[key] = val == "S"
                elif key in ints:
                    row[key] = int(val)
                else:
                    row[key] = None if val == "" else float(val)
            rows.append(row)
    return rows


def median_index(costs: list[int]) -> int:
    """Index of the median cost; for an even count, the lower median."""
    order = sorted(range(len(costs)), key=lambda i: (costs[i], i))
    return order[(len(costs) - 1) // 2]


@dataclass
class BatchSummary:
    outcomes: list[SolveOutcome]
    trace_files: list[Path]
    summary_file: Path
    median_run: int

    @property
    def median_cost(self) -> int:
        return self.outcomes[self.median_run].total_cost

    @property
    def median_outcome(self) -> SolveOutcome:
        return self.outcomes[self.median_run]


def run_batch(spec: ExperimentSpec) -> BatchSummary:
    spec.validate()
    problem = spec.build_problem()
    spec.solver.resolve(problem.n)  # reject bad solver settings before any run
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(2, len(str(spec.runs - 1)))

    outcomes, files = [], []
    for i in range(spec.runs):
        cfg = replace(spec.solver, seed=spec.seed + i)
        outcome = solve(problem.with_fresh_counters(), cfg)
        path = out / f"trace_run{i:0{width}d}.csv"
        emit_trace_csv(outcome, path)
        outcomes.append(outcome)
        files.append(path)

    med = median_index([o.total_cost for o in outcomes])
    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for i, (o, p) in enumerate(zip(outcomes, files)):
            w.writerow([i, spec.seed + i, o.reason, o.iterations, _fmt(o.f), _fmt(o.gnorm),
                        o.total_cost, p.name, int(i == med)])
    return BatchSummary(outcomes, files, summary_path, med)


def parse_theta(value) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(value)
