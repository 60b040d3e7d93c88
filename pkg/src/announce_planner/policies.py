"""Baseline announcement strategies and the shared evaluation entry point.

Two heuristics bracket the solver policies: announcing the latest
estimate verbatim, and announcing the mode of the filtered belief.
``evaluate`` dispatches any policy kind to its rule so simulation, the
advisor service and the CLI all act through one code path.
"""

from __future__ import annotations

from typing import Sequence

from .belief import Belief, most_likely_completion
from .model import ObservableState
from .solvers import Policy


class NoObservation(LookupError):
    """A policy that follows estimates was asked to act before any arrived."""


def last_observed_action(history: Sequence[int], x: ObservableState) -> int:
    """Announce the latest estimate available when acting."""
    if not history:
        raise NoObservation("no estimate has been received yet")
    return int(history[-1])


def most_likely_action(b: Belief) -> int:
    """Announce the belief's most likely completion week."""
    return most_likely_completion(b)


def evaluate(policy: Policy, x: ObservableState, b: Belief, history: Sequence[int]) -> int:
    """Deterministic announcement for any policy kind."""
    if policy.kind == "last_observed":
        return last_observed_action(history, x)
    if policy.kind == "most_likely":
        return most_likely_action(b)
    if policy.kind in ("qmdp", "point_based"):
        return policy.act(x, b)
    raise ValueError(f"unknown policy kind {policy.kind!r}")
