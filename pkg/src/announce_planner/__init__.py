"""Announcement-control toolkit for project completion times."""

from .belief import Belief, ZeroLikelihood, initial_belief, most_likely_completion, update
from .model import (
    ConfigError,
    ObservableState,
    ProblemConfig,
    config_from_dict,
    enumerate_states,
    load_config,
    observation_distribution,
    preset_config,
    reward,
    transition_hidden,
    transition_observable,
)
from .policies import NoObservation, evaluate, last_observed_action, most_likely_action
from .sim import EpisodeRecord, MetricsSummary, ReplayStream, run_batch, run_episode, scenario_trace
from .solvers import (
    ConfigMismatch,
    FormatError,
    Policy,
    SolveReport,
    baseline_policy,
    load_policy,
    save_policy,
    solve_point_based,
    solve_qmdp,
)
from .sweep import SweepPoint, baseline_points, pareto_frontier, pareto_sweep

__version__ = "0.1.0"

__all__ = [
    "Belief",
    "ConfigError",
    "ConfigMismatch",
    "EpisodeRecord",
    "FormatError",
    "MetricsSummary",
    "NoObservation",
    "ObservableState",
    "Policy",
    "ProblemConfig",
    "ReplayStream",
    "SolveReport",
    "SweepPoint",
    "ZeroLikelihood",
    "baseline_points",
    "baseline_policy",
    "config_from_dict",
    "enumerate_states",
    "evaluate",
    "initial_belief",
    "last_observed_action",
    "load_config",
    "load_policy",
    "most_likely_action",
    "most_likely_completion",
    "observation_distribution",
    "pareto_frontier",
    "pareto_sweep",
    "preset_config",
    "reward",
    "run_batch",
    "run_episode",
    "save_policy",
    "scenario_trace",
    "solve_point_based",
    "solve_qmdp",
    "transition_hidden",
    "transition_observable",
    "update",
]
