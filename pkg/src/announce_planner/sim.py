"""Episode simulation with common random numbers and batch metrics.

Every episode index maps to a fixed stream of uniform quantiles. Random
draws go through inverse CDFs at those quantiles, so two policies
compared on the same episode index consume identical randomness even
after their hidden completion trajectories diverge. Batch results are
reproducible bit for bit for a fixed master seed, independent of how
many workers execute them.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from . import belief as bf
from . import policies as pol
from .model import (
    ObservableState,
    ProblemConfig,
    observation_distribution,
    reward,
    transition_hidden,
    transition_observable,
)
from .solvers import Policy

logger = logging.getLogger(__name__)

EPISODE_CSV_COLUMNS = (
    "seed", "policy", "initial_completion", "final_completion",
    "total_reward", "num_changes", "completion_increase", "cumulative_error",
)


class StepRecord(NamedTuple):
    t: int
    true_completion: int
    observation: int
    action: int
    reward: float


@dataclass
class EpisodeRecord:
    steps: list[StepRecord]
    initial_completion: int
    final_completion: int
    total_reward: float
    undiscounted_reward: float
    num_changes: int
    completion_increase: int
    cumulative_error: int

    @property
    def error_per_step(self) -> float:
        return self.cumulative_error / len(self.steps)


@dataclass
class MetricsSummary:
    mean_reward: float
    std_reward: float
    mean_changes: float
    mean_completion_increase: float
    mean_cumulative_error: float
    n_episodes: int
    mean_error_per_step: float = 0.0
    mean_undiscounted_reward: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mean_reward": self.mean_reward,
            "std_reward": self.std_reward,
            "mean_changes": self.mean_changes,
            "mean_completion_increase": self.mean_completion_increase,
            "mean_cumulative_error": self.mean_cumulative_error,
            "n_episodes": self.n_episodes,
            "mean_error_per_step": self.mean_error_per_step,
            "mean_undiscounted_reward": self.mean_undiscounted_reward,
        }


class ReplayStream:
    """Quantile streams fully determined by (master seed, episode index).

    ``initial`` drives the initial completion draw, ``u[t]`` the weekly
    estimate and ``v[t]`` the replanning delay at step t.
    """

    def __init__(self, master_seed: int, episode_index: int, horizon: int):
        self.master_seed = master_seed
        self.episode_index = episode_index
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=master_seed, spawn_key=(episode_index,)))
        self.initial = 1.0 - rng.random()
        self.u = 1.0 - rng.random(horizon + 2)
        self.v = 1.0 - rng.random(horizon + 2)


def inverse_cdf(dist: np.ndarray, quantile: float) -> int:
    """Smallest support index whose cumulative mass reaches ``quantile``."""
    cdf = np.cumsum(dist)
    cdf /= cdf[-1]
    return min(int(np.searchsorted(cdf, quantile, side="left")), len(dist) - 1)


def _needs_belief(policy: Policy) -> bool:
    return policy.kind != "last_observed"


def run_episode(cfg: ProblemConfig, policy: Policy, replay: ReplayStream,
                capture_beliefs: bool = False,
                initial_completion: int | None = None,
                ) -> tuple[EpisodeRecord, list[bf.Belief]]:
    """Simulate one project under ``policy`` with the given quantile stream.

    Each step receives the weekly estimate, acts, collects the reward
    and advances the hidden state; the episode ends at the completion
    week. A pinned ``initial_completion`` overrides the stream's initial
    draw (scenario mode).
    """
    if policy.config_fingerprint != cfg.fingerprint():
        raise ValueError("policy fingerprint does not match the configuration")
    n = cfg.n_completion
    if initial_completion is None:
        y = cfg.t_min + inverse_cdf(np.full(n, 1.0 / n), replay.initial)
    else:
        if not (cfg.t_min <= initial_completion <= cfg.t_max):
            raise ValueError(f"initial completion {initial_completion} out of range")
        y = initial_completion
    y0 = y
    x = ObservableState(0, cfg.t_min)
    b = bf.initial_belief(cfg)
    track_belief = _needs_belief(policy) or capture_beliefs
    history: list[int] = []
    steps: list[StepRecord] = []
    snapshots: list[bf.Belief] = []
    total = 0.0
    undiscounted = 0.0
    num_changes = 0
    cumulative_error = 0
    prev_action: int | None = None

    t = 0
    while True:
        completed = x.t >= y
        o = cfg.t_min + inverse_cdf(observation_distribution(cfg, x, y), replay.u[t])
        history.append(o)
        if track_belief:
            if t == 0:
                b = bf.correct(cfg, b, o, completed)
            else:
                try:
                    b = bf.update(cfg, b, prev_action, o, completed)
                except bf.ZeroLikelihood:
                    logger.warning("belief underflow at t=%d; falling back to prediction", x.t)
                    b = bf.predict(cfg, b, prev_action)
        a = pol.evaluate(policy, x, b, history)
        r = reward(cfg, x, y, a)
        total += (cfg.discount ** t) * r
        undiscounted += r
        steps.append(StepRecord(x.t, y, o, a, r))
        if capture_beliefs:
            snapshots.append(b)
        if prev_action is not None and a != prev_action:
            num_changes += 1
        if x.t < y:
            cumulative_error += abs(a - y)
        prev_action = a
        if completed or x.t >= cfg.t_max:
            break
        y_next = cfg.t_min + inverse_cdf(transition_hidden(cfg, x, y, a), replay.v[t])
        x = transition_observable(cfg, x, y, a)
        y = y_next
        t += 1

    record = EpisodeRecord(
        steps=steps,
        initial_completion=y0,
        final_completion=y,
        total_reward=total,
        undiscounted_reward=undiscounted,
        num_changes=num_changes,
        completion_increase=y - y0,
        cumulative_error=cumulative_error,
    )
    return record, snapshots


def summarize(records: list[EpisodeRecord]) -> MetricsSummary:
    rewards = np.array([r.total_reward for r in records])
    return MetricsSummary(
        mean_reward=float(rewards.mean()),
        std_reward=float(rewards.std(ddof=1)) if len(records) > 1 else 0.0,
        mean_changes=float(np.mean([r.num_changes for r in records])),
        mean_completion_increase=float(np.mean([r.completion_increase for r in records])),
        mean_cumulative_error=float(np.mean([r.cumulative_error for r in records])),
        n_episodes=len(records),
        mean_error_per_step=float(np.mean([r.error_per_step for r in records])),
        mean_undiscounted_reward=float(np.mean([r.undiscounted_reward for r in records])),
    )


def _episode_chunk(cfg: ProblemConfig, policies: dict[str, Policy],
                   master_seed: int, indices: list[int]) -> dict[str, list[EpisodeRecord]]:
    out: dict[str, list[EpisodeRecord]] = {name: [] for name in policies}
    for i in indices:
        replay = ReplayStream(master_seed, i, cfg.t_max)
        for name, policy in policies.items():
            record, _ = run_episode(cfg, policy, replay)
            out[name].append(record)
    return out


def run_batch(cfg: ProblemConfig, policies: Mapping[str, Policy], n: int,
              master_seed: int, workers: int = 1,
              ) -> tuple[dict[str, MetricsSummary], dict[str, list[EpisodeRecord]]]:
    """Run ``n`` coupled episodes for every policy.

    Episode i draws its quantiles from (master_seed, i) for every policy
    alike. Worker count affects wall time only; records are merged in
    episode order so results are identical for any value.
    """
    if n < 1:
        raise ValueError("need at least one episode")
    policies = dict(policies)
    indices = list(range(n))
    if workers <= 1 or n < 4:
        merged = _episode_chunk(cfg, policies, master_seed, indices)
    else:
        chunk_size = max(1, (n + workers * 4 - 1) // (workers * 4))
        chunks = [indices[i:i + chunk_size] for i in range(0, n, chunk_size)]
        merged = {name: [] for name in policies}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_episode_chunk, cfg, policies, master_seed, c) for c in chunks]
            for future in futures:
                part = future.result()
                for name in policies:
                    merged[name].extend(part[name])
    summaries = {name: summarize(records) for name, records in merged.items()}
    return summaries, merged


@dataclass
class ScenarioTrace:
    """Episode record plus per-step belief snapshots for plotting."""

    policy_name: str
    seed: int
    record: EpisodeRecord
    beliefs: list[bf.Belief] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy_name,
            "seed": self.seed,
            "initial_completion": self.record.initial_completion,
            "final_completion": self.record.final_completion,
            "total_reward": self.record.total_reward,
            "num_changes": self.record.num_changes,
            "completion_increase": self.record.completion_increase,
            "cumulative_error": self.record.cumulative_error,
            "steps": [
                {
                    "t": s.t,
                    "true_completion": s.true_completion,
                    "observation": s.observation,
                    "announcement": s.action,
                    "reward": s.reward,
                    "belief": belief.to_pairs(),
                    "belief_mode": bf.most_likely_completion(belief),
                }
                for s, belief in zip(self.record.steps, self.beliefs)
            ],
        }


def scenario_trace(cfg: ProblemConfig, policy: Policy, fixed_initial_completion: int,
                   seed: int, policy_name: str | None = None) -> ScenarioTrace:
    """Run one episode with a pinned initial completion and belief capture."""
    replay = ReplayStream(seed, 0, cfg.t_max)
    record, beliefs = run_episode(cfg, policy, replay, capture_beliefs=True,
                                  initial_completion=fixed_initial_completion)
    return ScenarioTrace(policy_name or policy.kind, seed, record, beliefs)


def write_episode_csv(path, records_by_policy: Mapping[str, list[EpisodeRecord]],
                      master_seed: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EPISODE_CSV_COLUMNS)
        for name, records in records_by_policy.items():
            for i, r in enumerate(records):
                writer.writerow([
                    f"{master_seed}:{i}", name, r.initial_completion, r.final_completion,
                    repr(r.total_reward), r.num_changes, r.completion_increase,
                    r.cumulative_error,
                ])


def write_summary_json(path, summaries: Mapping[str, MetricsSummary]) -> None:
    payload = {name: s.to_dict() for name, s in summaries.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
