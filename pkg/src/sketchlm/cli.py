"""Command-line entry point: ``sketchlm [--config FILE] [overrides...]``.

The optional JSON config file holds a flat object whose keys are
:class:`~sketchlm.experiment.ExperimentSpec` or
:class:`~sketchlm.solver.SolverConfig` field names; flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiment import ExperimentSpec, parse_theta, run_batch
from .solver import MODES

# flag -> settings key
_FLAGS = {
    "problem": "problem",
    "d": "d",
    "n": "n",
    "dataset": "dataset",
    "mode": "mode",
    "sketch": "sketch",
    "l0_frac": "l0_frac",
    "theta": "theta",
    "eta": "eta",
    "mu": "mu",
    "beta": "beta",
    "grad_tol": "grad_tol",
    "max_iter": "max_iter",
    "runs": "runs",
    "seed": "seed",
    "out": "out",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sketchlm", description="Run seeded batches of sketched Levenberg-Marquardt.")
    p.add_argument("--config", type=Path, help="JSON file with experiment and solver settings")
    p.add_argument("--problem", help="built-in problem name (broydn3d, freurone) or 'dataset'")
    p.add_argument("--d", type=int, help="size parameter of the built-in problem")
    p.add_argument("--n", type=int, help="lift the problem to n variables by random augmentation")
    p.add_argument("--dataset", help="classification data file (dense CSV or sparse idx:val text)")
    p.add_argument("--mode", choices=MODES, help="solver variant")
    p.add_argument("--sketch", help="sketch ensemble, e.g. s-hashing, gaussian, stable-1-hashing, sampling")
    p.add_argument("--l0-frac", type=float, help="initial sketch size as a fraction of n")
    p.add_argument("--theta", type=parse_theta, help="model-quality threshold ('inf' disables it)")
    p.add_argument("--eta", type=float, help="forcing term; 0 selects exact solves")
    p.add_argument("--mu", type=float, help="regularisation parameter")
    p.add_argument("--beta", type=float, help="exponent of the local parameter schedules")
    p.add_argument("--grad-tol", type=float, help="stop when the gradient norm drops below this")
    p.add_argument("--max-iter", type=int, help="iteration limit")
    p.add_argument("--runs", type=int, help="number of seeded repetitions")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed + i")
    p.add_argument("--out", help="output directory for CSV files")
    return p


def settings_from_args(args: argparse.Namespace) -> dict:
    settings: dict = {}
    if args.config is not None:
        data = json.loads(args.config.read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must contain a JSON object")
        settings.update(data)
    for attr, key in _FLAGS.items():
        value = getattr(args, attr)
        if value is not None:
            settings[key] = value
    return settings


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = ExperimentSpec.from_dict(settings_from_args(args))
        summary = run_batch(spec)
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"sketchlm: error: {exc}", file=sys.stderr)
        return 2
    med = summary.median_outcome
    for i, o in enumerate(summary.outcomes):
        print(f"run {i:2d}: {o.reason:<10} iterations={o.iterations:<4d} gnorm={o.gnorm:.3e} cost={o.total_cost}")
    print(f"median run {summary.median_run}: cost={med.total_cost} (summary in {summary.summary_file})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
