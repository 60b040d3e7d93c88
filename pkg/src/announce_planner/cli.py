"""Command-line surface: solve, simulate, scenario, sweep, report, serve.

All file outputs are byte-reproducible given identical flags and
inputs. Solver policies used by simulation commands are either loaded
from a policies directory or solved on demand with deterministic caps.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click

from . import sim, sweep as sweep_mod
from .model import ProblemConfig, load_config
from .solvers import (
    ConfigMismatch,
    FormatError,
    Policy,
    baseline_policy,
    load_policy,
    save_policy,
    solve_point_based,
    solve_qmdp,
)

# CLI policy names as used in reports and figures.
POLICY_NAMES = {
    "qmdp": "qmdp",
    "sarsop": "point_based",
    "mostlikely": "most_likely",
    "observedtime": "last_observed",
}

# Deterministic caps for on-demand point-based solving inside
# simulation commands (wall-clock budgets would break reproducibility).
ON_DEMAND_PB_ITERATIONS = 2000
ON_DEMAND_PB_PRECISION = 1e-3


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _default_workers() -> int:
    env = os.environ.get("ANNOUNCE_PLANNER_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _resolve_policy(name: str, cfg: ProblemConfig, policies_dir: str | None) -> Policy:
    kind = POLICY_NAMES.get(name)
    if kind is None:
        raise click.UsageError(f"unknown policy {name!r}; choose from {sorted(POLICY_NAMES)}")
    if kind in ("last_observed", "most_likely"):
        return baseline_policy(kind, cfg)
    if policies_dir:
        candidate = Path(policies_dir) / f"{name}.json"
        if candidate.exists():
            return load_policy(candidate, cfg)
    if kind == "qmdp":
        policy, _ = solve_qmdp(cfg)
        return policy
    policy, _ = solve_point_based(cfg, precision=ON_DEMAND_PB_PRECISION,
                                  time_budget=float("inf"),
                                  max_iterations=ON_DEMAND_PB_ITERATIONS)
    return policy


@click.group()
def main():
    """Announcement-control toolkit for project completion times."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--solver", required=True, type=click.Choice(["qmdp", "sarsop"]))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--tol", type=float, default=1e-6, show_default=True, help="Value-iteration stop threshold (qmdp).")
@click.option("--precision", type=float, default=1e-3, show_default=True, help="Bound-gap target (sarsop).")
@click.option("--time-budget", type=float, default=600.0, show_default=True, help="Wall-clock budget in seconds (sarsop).")
@click.option("--max-iterations", type=int, default=None, help="Deterministic iteration cap (sarsop).")
@click.option("--allow-nonconverged", is_flag=True, help="Exit 0 even when the solver stopped early.")
def solve(config_path, solver, out_path, tol, precision, time_budget, max_iterations, allow_nonconverged):
    """Solve a policy and write it to a policy file."""
    try:
        cfg = load_config(config_path)
        if solver == "qmdp":
            policy, report = solve_qmdp(cfg, tol=tol)
        else:
            policy, report = solve_point_based(cfg, precision=precision,
                                               time_budget=time_budget,
                                               max_iterations=max_iterations)
        save_policy(policy, out_path)
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(report.to_dict(), sort_keys=True))
    if not report.converged and not allow_nonconverged:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policies", "policy_list", required=True, help="Comma-separated policy names (qmdp,sarsop,mostlikely,observedtime).")
@click.option("--episodes", required=True, type=click.IntRange(min=1))
@click.option("--seed", required=True, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--workers", type=int, default=None, help="Parallel episode workers (default: cores or ANNOUNCE_PLANNER_WORKERS).")
@click.option("--policies-dir", type=click.Path(file_okay=False), default=None, help="Directory with presolved <name>.json policy files.")
def simulate(config_path, policy_list, episodes, seed, out_dir, workers, policies_dir):
    """Run a common-random-number batch and write per-episode CSV plus summaries."""
    names = [p.strip() for p in policy_list.split(",") if p.strip()]
    if not names:
        raise click.UsageError("--policies must name at least one policy")
    workers = workers or _default_workers()
    try:
        cfg = load_config(config_path)
        policies = {name: _resolve_policy(name, cfg, policies_dir) for name in names}
        summaries, records = sim.run_batch(cfg, policies, episodes, seed, workers=workers)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sim.write_episode_csv(out / "episodes.csv", records, seed)
        sim.write_summary_json(out / "summaries.json", summaries)
    except (ConfigMismatch, FormatError) as exc:
        _fail(str(exc))
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {Path(out_dir) / 'episodes.csv'} and summaries.json")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", "policy_name", required=True)
@click.option("--initial-completion", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--policies-dir", type=click.Path(file_okay=False), default=None)
def scenario(config_path, policy_name, initial_completion, seed, out_path, policies_dir):
    """Trace one episode with a pinned initial completion and belief snapshots."""
    try:
        cfg = load_config(config_path)
        policy = _resolve_policy(policy_name, cfg, policies_dir)
        trace = sim.scenario_trace(cfg, policy, initial_completion, seed, policy_name=policy_name)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(trace.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except (ConfigMismatch, FormatError, OSError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {out_path}")


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", "grid_text", default=",".join(str(g) for g in sweep_mod.DEFAULT_GRID),
              show_default=True, help="Comma-separated weight values used for both axes.")
@click.option("--episodes", required=True, type=click.IntRange(min=1))
@click.option("--seed", required=True, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--workers", type=int, default=None)
def sweep_cmd(config_path, grid_text, episodes, seed, out_dir, workers):
    """Grid-sweep the error/change weights and extract the Pareto frontier."""
    try:
        grid = [float(g) for g in grid_text.split(",") if g.strip()]
    except ValueError:
        raise click.UsageError(f"bad grid value in {grid_text!r}")
    if not grid:
        raise click.UsageError("--grid must contain at least one value")
    workers = workers or _default_workers()
    try:
        cfg = load_config(config_path)
        points = sweep_mod.pareto_sweep(cfg, grid, episodes, seed, workers=workers)
        frontier = sweep_mod.pareto_frontier(points)
        baselines = sweep_mod.baseline_points(cfg, episodes, seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sweep_mod.write_sweep_csv(out / "sweep.csv", points, frontier)
        sweep_mod.write_sweep_json(out / "sweep.json", points, frontier, baselines)
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {Path(out_dir) / 'sweep.csv'} ({len(points)} points, {len(frontier)} on frontier)")


def _collect_report(in_dir: Path) -> dict:
    report: dict = {}
    summaries_path = in_dir / "summaries.json"
    if summaries_path.exists():
        with open(summaries_path, encoding="utf-8") as fh:
            metrics = json.load(fh)
        report["metrics"] = metrics
        report["reward_by_policy"] = [
            {"policy": name, "mean": m["mean_reward"], "std": m["std_reward"]}
            for name, m in sorted(metrics.items())
        ]
        report["changes_by_policy"] = [
            {"policy": name, "mean": m["mean_changes"]} for name, m in sorted(metrics.items())
        ]
        report["completion_increase_by_policy"] = [
            {"policy": name, "mean": m["mean_completion_increase"]}
            for name, m in sorted(metrics.items())
        ]
        report["error_by_policy"] = [
            {"policy": name, "mean": m["mean_cumulative_error"]}
            for name, m in sorted(metrics.items())
        ]
    sweep_path = in_dir / "sweep.json"
    if sweep_path.exists():
        with open(sweep_path, encoding="utf-8") as fh:
            report["pareto"] = json.load(fh)
    scenarios = []
    for path in sorted(in_dir.glob("*.json")):
        if path.name in ("summaries.json", "sweep.json"):
            continue
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict) and "steps" in doc and "policy" in doc:
            scenarios.append({
                "policy": doc["policy"],
                "seed": doc.get("seed"),
                "steps": [
                    {
                        "t": s["t"],
                        "observation": s["observation"],
                        "announcement": s["announcement"],
                        "belief_mode": s["belief_mode"],
                        "true_completion": s["true_completion"],
                    }
                    for s in doc["steps"]
                ],
            })
    if scenarios:
        report["scenarios"] = scenarios
    return report


def _write_report_csv(report: dict, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def write(name: str, header: list[str], rows: list[list]) -> None:
        path = out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        written.append(path)

    for series, columns in (
        ("reward_by_policy", ["policy", "mean", "std"]),
        ("changes_by_policy", ["policy", "mean"]),
        ("completion_increase_by_policy", ["policy", "mean"]),
        ("error_by_policy", ["policy", "mean"]),
    ):
        if series in report:
            rows = [[entry.get(c) for c in columns] for entry in report[series]]
            write(f"{series}.csv", columns, rows)
    if "pareto" in report:
        frontier = {(p["lambda_e"], p["lambda_c"]) for p in report["pareto"]["frontier"]}
        rows = [
            [p["lambda_e"], p["lambda_c"], p["mean_error"], p["mean_changes"],
             int((p["lambda_e"], p["lambda_c"]) in frontier)]
            for p in report["pareto"]["points"]
        ]
        write("pareto.csv", ["lambda_e", "lambda_c", "mean_error", "mean_changes", "on_frontier"], rows)
    for scenario_doc in report.get("scenarios", []):
        rows = [
            [s["t"], s["observation"], s["announcement"], s["belief_mode"], s["true_completion"]]
            for s in scenario_doc["steps"]
        ]
        write(f"scenario_{scenario_doc['policy']}.csv",
              ["t", "observation", "announcement", "belief_mode", "true_completion"], rows)
    return written


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="JSON: output file (default stdout). CSV: output directory (default <in>/report).")
def report(in_dir, fmt, out_path):
    """Collate batch, sweep and scenario outputs into plot-ready series."""
    in_path = Path(in_dir)
    collected = _collect_report(in_path)
    if not collected:
        _fail(f"no batch, sweep or scenario artifacts found in {in_dir}")
    if fmt == "json":
        text = json.dumps(collected, indent=2, sort_keys=True) + "\n"
        if out_path:
            Path(out_path).write_text(text, encoding="utf-8")
            click.echo(f"wrote {out_path}")
        else:
            click.echo(text, nl=False)
    else:
        out_dir = Path(out_path) if out_path else in_path / "report"
        written = _write_report_csv(collected, out_dir)
        click.echo(f"wrote {len(written)} series files to {out_dir}")


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--policies-dir", type=click.Path(file_okay=False), default=None,
              help="Directory with presolved <preset>-<kind>.json policy files.")
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Static dashboard directory to mount at /ui.")
@click.option("--snapshot", "snapshot_path", type=click.Path(dir_okay=False), default=None,
              help="Optional session snapshot file restored at startup and written at shutdown.")
def serve(port, host, policies_dir, ui_dir, snapshot_path):
    """Run the advisor HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(policies_dir=policies_dir, ui_dir=ui_dir, snapshot_path=snapshot_path)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
