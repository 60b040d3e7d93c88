"""Reward-weight grid sweep and Pareto frontier extraction.

Each grid cell re-solves the announcement policy under its own error
and change weights, then scores it on a common-random-number batch so
cells are comparable. The frontier minimizes (average prediction error
per step, announcement changes).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .model import ProblemConfig
from .sim import run_batch
from .solvers import baseline_policy, solve_qmdp

DEFAULT_GRID = (0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0)

SWEEP_CSV_COLUMNS = ("lambda_e", "lambda_c", "mean_error", "mean_changes", "on_frontier")


@dataclass(frozen=True)
class SweepPoint:
    lambda_e: float
    lambda_c: float
    mean_error: float            # cumulative error averaged per step, then per episode
    mean_changes: float
    mean_cumulative_error: float
    solver_converged: bool

    def to_dict(self) -> dict:
        return {
            "lambda_e": self.lambda_e,
            "lambda_c": self.lambda_c,
            "mean_error": self.mean_error,
            "mean_changes": self.mean_changes,
            "mean_cumulative_error": self.mean_cumulative_error,
            "solver_converged": self.solver_converged,
        }


def _sweep_cell(base: ProblemConfig, lambda_e: float, lambda_c: float,
                n_runs: int, master_seed: int) -> SweepPoint:
    cfg = replace(base, lambda_e=lambda_e, lambda_c=lambda_c)
    policy, report = solve_qmdp(cfg)
    summaries, _ = run_batch(cfg, {"qmdp": policy}, n_runs, master_seed)
    s = summaries["qmdp"]
    return SweepPoint(
        lambda_e=lambda_e,
        lambda_c=lambda_c,
        mean_error=s.mean_error_per_step,
        mean_changes=s.mean_changes,
        mean_cumulative_error=s.mean_cumulative_error,
        solver_converged=report.converged,
    )


def pareto_sweep(base: ProblemConfig, grid: Sequence[float], n_runs: int,
                 master_seed: int, workers: int = 1) -> list[SweepPoint]:
    """Solve and score one policy per (lambda_e, lambda_c) grid cell.

    The final-miss weight stays at the base value throughout. Every cell
    shares the same master seed, so all cells see the same projects.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    cells = [(le, lc) for le in grid for lc in grid]
    if workers <= 1:
        return [_sweep_cell(base, le, lc, n_runs, master_seed) for le, lc in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_cell, base, le, lc, n_runs, master_seed)
                   for le, lc in cells]
        return [f.result() for f in futures]


def baseline_points(base: ProblemConfig, n_runs: int, master_seed: int) -> dict[str, dict]:
    """Reference (error, changes) for the heuristics on the same batch.

    The heuristics never read the reward weights, so one batch covers
    the whole grid.
    """
    policies = {
        "observedtime": baseline_policy("last_observed", base),
        "mostlikely": baseline_policy("most_likely", base),
    }
    summaries, _ = run_batch(base, policies, n_runs, master_seed)
    return {
        name: {
            "mean_error": s.mean_error_per_step,
            "mean_changes": s.mean_changes,
            "mean_cumulative_error": s.mean_cumulative_error,
        }
        for name, s in summaries.items()
    }


def dominates(p: SweepPoint, q: SweepPoint) -> bool:
    """True when p is at least as good on both axes and better on one."""
    return (p.mean_error <= q.mean_error and p.mean_changes <= q.mean_changes
            and (p.mean_error < q.mean_error or p.mean_changes < q.mean_changes))


def pareto_frontier(points: Sequence[SweepPoint]) -> list[SweepPoint]:
    """Non-dominated subset, sorted by error; coordinate ties deduplicated."""
    if not points:
        raise ValueError("no sweep points given")
    frontier: list[SweepPoint] = []
    for p in points:
        if any(dominates(q, p) for q in points):
            continue
        frontier.append(p)
    # Identical coordinates keep the lexicographically smallest weights.
    by_coord: dict[tuple[float, float], SweepPoint] = {}
    for p in frontier:
        key = (p.mean_error, p.mean_changes)
        best = by_coord.get(key)
        if best is None or (p.lambda_e, p.lambda_c) < (best.lambda_e, best.lambda_c):
            by_coord[key] = p
    out = list(by_coord.values())
    out.sort(key=lambda p: (p.mean_error, p.mean_changes, p.lambda_e, p.lambda_c))
    return out


def write_sweep_csv(path, points: Sequence[SweepPoint], frontier: Sequence[SweepPoint]) -> None:
    on_frontier = {(p.lambda_e, p.lambda_c) for p in frontier}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        for p in points:
            writer.writerow([
                repr(p.lambda_e), repr(p.lambda_c), repr(p.mean_error),
                repr(p.mean_changes), int((p.lambda_e, p.lambda_c) in on_frontier),
            ])


def write_sweep_json(path, points: Sequence[SweepPoint], frontier: Sequence[SweepPoint],
                     baselines: dict[str, dict]) -> None:
    payload = {
        "points": [p.to_dict() for p in points],
        "frontier": [p.to_dict() for p in frontier],
        "baselines": baselines,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
