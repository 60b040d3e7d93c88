"""Announcement-control model for project completion times.

A project has a hidden true completion week. A manager observes noisy
weekly estimates and announces a completion week to stakeholders. The
announced week and the current week are fully visible; the true
completion week is not. Changing the announcement mid-project can push
the true completion later (replanning disruption), which is what makes
the announcement decision a sequential control problem rather than a
pure estimation problem.

All times are integer weeks. Distributions over completion weeks are
returned as dense probability vectors indexed by ``week - t_min``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

# Below this scale the estimate noise is treated as exactly zero and the
# observation collapses to a point mass on the true completion week.
SIGMA_FLOOR = 1e-6

_PROB_TOL = 1e-12


class ConfigError(ValueError):
    """Raised for invalid or malformed problem configurations."""


@dataclass(frozen=True)
class ProblemConfig:
    """All parameters of one announcement-control problem instance."""

    t_min: int
    t_max: int
    discount: float
    lambda_e: float
    lambda_c: float
    lambda_f: float
    p_none: float
    p_small: float
    p_large: float
    delta_small: int
    delta_large: int

    def __post_init__(self) -> None:
        if not (2 <= self.t_min < self.t_max):
            raise ConfigError(f"need 2 <= t_min < t_max, got [{self.t_min}, {self.t_max}]")
        if not (0.0 <= self.discount < 1.0):
            raise ConfigError(f"discount must be in [0, 1), got {self.discount}")
        for name in ("lambda_e", "lambda_c", "lambda_f"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        probs = (self.p_none, self.p_small, self.p_large)
        if any(p < 0 for p in probs):
            raise ConfigError("delay probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > _PROB_TOL:
            raise ConfigError(f"delay probabilities must sum to 1, got {sum(probs)!r}")
        if not (0 < self.delta_small < self.delta_large):
            raise ConfigError("need 0 < delta_small < delta_large")

    @property
    def n_completion(self) -> int:
        """Number of admissible completion weeks."""
        return self.t_max - self.t_min + 1

    def completion_values(self) -> np.ndarray:
        return np.arange(self.t_min, self.t_max + 1)

    def fingerprint(self) -> str:
        """Stable hash identifying this parameterization."""
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


# Default weights and delay model used throughout the experiments.
DEFAULTS = dict(
    discount=0.98,
    lambda_e=8.0,
    lambda_c=2.0,
    lambda_f=1000.0,
    p_none=0.5,
    p_small=0.4,
    p_large=0.1,
    delta_small=1,
    delta_large=3,
)

# Quarter, half-year, three-quarter and year-long projects at weekly
# granularity.
PRESET_HORIZONS = {
    "small": (2, 13),
    "medium": (2, 26),
    "large": (2, 39),
    "extra-large": (2, 52),
}


def preset_config(name: str, **overrides) -> ProblemConfig:
    """Build one of the named problem sizes with default parameters."""
    key = name.replace("_", "-").lower()
    if key not in PRESET_HORIZONS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESET_HORIZONS)}")
    t_min, t_max = PRESET_HORIZONS[key]
    params = dict(DEFAULTS, t_min=t_min, t_max=t_max)
    params.update(overrides)
    return ProblemConfig(**params)


def config_from_dict(data: dict) -> ProblemConfig:
    """Strict construction from a JSON-shaped dict; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    known = {f.name for f in fields(ProblemConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    missing = known - set(data)
    if missing:
        raise ConfigError(f"missing config fields: {sorted(missing)}")
    return ProblemConfig(**data)


def load_config(path) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


class ObservableState(NamedTuple):
    """Fully visible part of the state: current week and last announcement."""

    t: int
    prev_announce: int


def _check_state(cfg: ProblemConfig, x: ObservableState, y: int) -> None:
    if not (0 <= x.t <= cfg.t_max):
        raise ValueError(f"week {x.t} outside [0, {cfg.t_max}]")
    if not (cfg.t_min <= x.prev_announce <= cfg.t_max):
        raise ValueError(f"announcement {x.prev_announce} outside [{cfg.t_min}, {cfg.t_max}]")
    if not (cfg.t_min <= y <= cfg.t_max):
        raise ValueError(f"completion {y} outside [{cfg.t_min}, {cfg.t_max}]")


def _check_action(cfg: ProblemConfig, a: int) -> None:
    if not (cfg.t_min <= a <= cfg.t_max):
        raise ValueError(f"announcement {a} outside [{cfg.t_min}, {cfg.t_max}]")


def _phi(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@lru_cache(maxsize=None)
def _observation_matrix(cfg: ProblemConfig, t: int) -> np.ndarray:
    """Estimate distribution at week ``t`` for every completion hypothesis.

    Row ``i`` is the distribution of the noisy estimate given true
    completion ``t_min + i``. Estimates are integer weeks obtained by
    integrating a Gaussian centered on the true completion over unit
    bins, truncated to [t_min - 0.5, t_max + 0.5] and renormalized. The
    noise scale (completion - t) / 3 shrinks to zero as the project
    nears completion, at which point the row is a point mass.
    """
    n = cfg.n_completion
    out = np.zeros((n, n))
    edges = np.arange(cfg.t_min, cfg.t_max + 2) - 0.5
    for i in range(n):
        mu = cfg.t_min + i
        sigma = (mu - t) / 3.0
        if sigma <= SIGMA_FLOOR:
            out[i, i] = 1.0
            continue
        cdf = np.array([_phi((e - mu) / sigma) for e in edges])
        weights = np.diff(cdf)
        out[i] = weights / weights.sum()
    out.setflags(write=False)
    return out


def observation_distribution(cfg: ProblemConfig, x_next: ObservableState, y_next: int) -> np.ndarray:
    """Distribution of the weekly estimate on arrival in (x_next, y_next).

    Returns a read-only probability vector over completion weeks
    [t_min, t_max], indexed by ``week - t_min``.
    """
    _check_state(cfg, x_next, y_next)
    return _observation_matrix(cfg, x_next.t)[y_next - cfg.t_min]


def transition_observable(cfg: ProblemConfig, x: ObservableState, y: int, a: int) -> ObservableState:
    """Deterministic clock-and-announcement update.

    The week advances by one until the project completes (t >= y); after
    that the clock is frozen and only the announcement component moves.
    """
    _check_state(cfg, x, y)
    _check_action(cfg, a)
    if x.t >= y:
        return ObservableState(x.t, a)
    return ObservableState(x.t + 1, a)


@lru_cache(maxsize=None)
def _delay_matrix(cfg: ProblemConfig) -> np.ndarray:
    """Replanning-delay kernel: row y -> distribution over next completion.

    Mass p_none stays put, p_small moves delta_small weeks later and
    p_large delta_large weeks later, both capped at t_max. Capped
    targets that coincide accumulate their mass.
    """
    n = cfg.n_completion
    out = np.zeros((n, n))
    for i in range(n):
        y = cfg.t_min + i
        out[i, i] += cfg.p_none
        out[i, min(y + cfg.delta_small, cfg.t_max) - cfg.t_min] += cfg.p_small
        out[i, min(y + cfg.delta_large, cfg.t_max) - cfg.t_min] += cfg.p_large
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _identity_rows(cfg: ProblemConfig) -> np.ndarray:
    out = np.eye(cfg.n_completion)
    out.setflags(write=False)
    return out


def transition_hidden(cfg: ProblemConfig, x: ObservableState, y: int, a: int) -> np.ndarray:
    """Distribution of the next true completion week.

    Keeping the previous announcement, the initial announcement (t = 0)
    and any post-completion step leave the completion unchanged; any
    other announcement change risks a replanning delay.
    """
    _check_state(cfg, x, y)
    _check_action(cfg, a)
    i = y - cfg.t_min
    if a == x.prev_announce or x.t == 0 or x.t >= y:
        return _identity_rows(cfg)[i]
    return _delay_matrix(cfg)[i]


def reward(cfg: ProblemConfig, x: ObservableState, y: int, a: int) -> float:
    """Per-step penalty for announcing ``a`` in state ((t, prev), y).

    Zero at the second-to-last week of the horizon and strictly after
    completion. At the completion week a wrong announcement pays the
    final-miss penalty on top of the error term. Before completion the
    penalty combines announcement error with a change fee that is waived
    when the new announcement is the true completion.
    """
    _check_state(cfg, x, y)
    _check_action(cfg, a)
    t = x.t
    if t == cfg.t_max - 1:
        return 0.0
    if t > y:
        return 0.0
    r = -cfg.lambda_e * abs(a - y)
    if a != x.prev_announce and a != y:
        r -= cfg.lambda_c
    if t == y and a != y:
        r -= cfg.lambda_f
    return r


class StateSpace:
    """Stable row-major enumeration of (t, prev_announce, true_completion)."""

    def __init__(self, cfg: ProblemConfig):
        self.cfg = cfg
        self.n_times = cfg.t_max + 1
        self.n_announce = cfg.n_completion
        self.n_completion = cfg.n_completion
        self.size = self.n_times * self.n_announce * self.n_completion

    def __len__(self) -> int:
        return self.size

    def index(self, x: ObservableState, y: int) -> int:
        _check_state(self.cfg, x, y)
        c = self.cfg
        return ((x.t * self.n_announce) + (x.prev_announce - c.t_min)) * self.n_completion + (y - c.t_min)

    def state(self, i: int) -> tuple[ObservableState, int]:
        if not (0 <= i < self.size):
            raise IndexError(f"state index {i} outside [0, {self.size})")
        c = self.cfg
        i, y_off = divmod(i, self.n_completion)
        t, prev_off = divmod(i, self.n_announce)
        return ObservableState(t, c.t_min + prev_off), c.t_min + y_off

    def __iter__(self) -> Iterator[tuple[ObservableState, int]]:
        c = self.cfg
        for t in range(self.n_times):
            for prev in range(c.t_min, c.t_max + 1):
                for y in range(c.t_min, c.t_max + 1):
                    yield ObservableState(t, prev), y


def enumerate_states(cfg: ProblemConfig) -> StateSpace:
    return StateSpace(cfg)
