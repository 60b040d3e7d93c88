"""Discrete Bayes filter over the hidden completion week.

The filter tracks a probability vector over completion weeks, paired
with the observable (week, previous announcement) it refers to. One
step combines three pieces of evidence: the announcement just made
(which may have triggered a replanning delay), the new weekly estimate,
and whether the project has actually finished. Completion is treated as
directly detectable, so a step without a completion event zeroes every
hypothesis at or before the current week.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ObservableState, ProblemConfig, _delay_matrix, _observation_matrix

# Unnormalized posteriors at or below this total mass are reported to the
# caller instead of being normalized into garbage.
LIKELIHOOD_FLOOR = 1e-300

_MASS_TOL = 1e-9


class ZeroLikelihood(RuntimeError):
    """All posterior mass vanished; the evidence contradicts every hypothesis."""


@dataclass(frozen=True)
class Belief:
    """Probability vector over completion weeks at one observable state.

    ``mass[i]`` is the probability that the project completes in week
    ``t_min + i``. Instances are treated as immutable values; updates
    return new beliefs.
    """

    observable: ObservableState
    mass: np.ndarray
    t_min: int

    def __post_init__(self):
        self.mass.setflags(write=False)

    @property
    def t_max(self) -> int:
        return self.t_min + len(self.mass) - 1

    def completions(self) -> np.ndarray:
        return np.arange(self.t_min, self.t_max + 1)

    def probability(self, completion: int) -> float:
        return float(self.mass[completion - self.t_min])

    def completed_mass(self) -> float:
        """Total probability already at or before the current week."""
        upto = self.observable.t - self.t_min + 1
        if upto <= 0:
            return 0.0
        return float(self.mass[:upto].sum())

    def to_pairs(self) -> list[dict]:
        """JSON-friendly histogram: one {completion, probability} per week."""
        return [
            {"completion": int(c), "probability": float(p)}
            for c, p in zip(self.completions(), self.mass)
        ]


def initial_belief(cfg: ProblemConfig) -> Belief:
    """Uniform prior over completion weeks at week 0.

    The announcement slot is a placeholder (t_min); nothing has been
    announced yet.
    """
    n = cfg.n_completion
    mass = np.full(n, 1.0 / n)
    return Belief(ObservableState(0, cfg.t_min), mass, cfg.t_min)


def _survival_mask(n: int, t_min: int, t: int, completed: bool) -> np.ndarray:
    """Consistency mask for the completion signal at week ``t``."""
    values = np.arange(t_min, t_min + n)
    return (values <= t) if completed else (values > t)


def _normalized(mass: np.ndarray) -> np.ndarray:
    total = mass.sum()
    if total <= LIKELIHOOD_FLOOR:
        raise ZeroLikelihood("posterior mass underflowed; evidence inconsistent with belief")
    return mass / total


def correct(cfg: ProblemConfig, b: Belief, o: int, completed: bool = False) -> Belief:
    """Measurement-only update at the belief's current week.

    Used for the week-0 estimate, which arrives before any announcement
    has been made and therefore involves no prediction step.
    """
    if not (cfg.t_min <= o <= cfg.t_max):
        raise ValueError(f"estimate {o} outside [{cfg.t_min}, {cfg.t_max}]")
    t = b.observable.t
    like = _observation_matrix(cfg, t)[:, o - cfg.t_min]
    mask = _survival_mask(len(b.mass), cfg.t_min, t, completed)
    return replace(b, mass=_normalized(b.mass * like * mask))


def predict(cfg: ProblemConfig, b: Belief, a: int) -> Belief:
    """Push the belief through the announcement's effect on completion.

    Advances the observable week unless the belief already sits on a
    completed project (all mass at or before the current week), in which
    case the clock is frozen and only the announcement changes.
    """
    if not (cfg.t_min <= a <= cfg.t_max):
        raise ValueError(f"announcement {a} outside [{cfg.t_min}, {cfg.t_max}]")
    x = b.observable
    frozen = b.completed_mass() > 0.5
    x_next = ObservableState(x.t if frozen else x.t + 1, a)
    if a == x.prev_announce or x.t == 0:
        return Belief(x_next, b.mass.copy(), b.t_min)
    # Hypotheses already at or before the current week are past delays.
    values = np.arange(b.t_min, b.t_max + 1)
    active = values > x.t
    mass = np.where(active, b.mass, 0.0) @ _delay_matrix(cfg)
    mass[~active] += b.mass[~active]
    return Belief(x_next, mass, b.t_min)


def update(cfg: ProblemConfig, b: Belief, a: int, o: int, completed: bool = False) -> Belief:
    """Full filter step: announcement effect, completion signal, estimate.

    ``completed`` describes the arrival week: False zeroes hypotheses at
    or before it, True zeroes the rest. Raises ZeroLikelihood when the
    evidence kills all mass; callers may fall back to the prediction.
    """
    predicted = predict(cfg, b, a)
    return correct(cfg, predicted, o, completed)


def most_likely_completion(b: Belief) -> int:
    """Argmax completion week; near-ties resolve to the earliest week."""
    top = b.mass.max()
    idx = int(np.argmax(b.mass >= top - 1e-12))
    return b.t_min + idx


def check_belief(b: Belief) -> None:
    """Validate normalization and nonnegativity (debug/test helper)."""
    if abs(float(b.mass.sum()) - 1.0) > _MASS_TOL:
        raise ValueError(f"belief mass sums to {b.mass.sum()!r}")
    if (b.mass < 0).any():
        raise ValueError("belief mass has negative entries")
