"""Offline policy synthesis and policy persistence.

Two solvers are provided. ``solve_qmdp`` runs dense value iteration on
the fully observed problem and keeps the per-action value tables as
alpha vectors over the flat state enumeration; acting with a belief
means weighting those tables by the belief, which treats the hidden
completion week as revealed after one step and therefore upper-bounds
the achievable value. ``solve_point_based`` (see point_based.py)
samples reachable beliefs and maintains matching lower/upper bounds.

Policies serialize to a versioned JSON envelope carrying a fingerprint
of the configuration they were solved for.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import belief as belief_mod
from .model import ObservableState, ProblemConfig

POLICY_FORMAT_VERSION = 1

POLICY_KINDS = ("qmdp", "point_based", "last_observed", "most_likely")

# Score differences below this are treated as ties when selecting actions.
ACTION_TIE_TOL = 1e-12


class FormatError(ValueError):
    """Policy file is unreadable or structurally invalid."""


class ConfigMismatch(ValueError):
    """Policy file was produced for a different configuration."""


@dataclass
class SolveReport:
    iterations: int
    residual: float
    wall_time: float
    converged: bool
    bounds: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        out = {
            "iterations": self.iterations,
            "residual": self.residual,
            "wall_time": self.wall_time,
            "converged": self.converged,
        }
        if self.bounds is not None:
            out["bounds"] = {"lower": self.bounds[0], "upper": self.bounds[1]}
        return out


@dataclass
class AlphaSet:
    """Alpha vectors over completion weeks attached to one observable state."""

    actions: np.ndarray   # announcement value per vector
    vectors: np.ndarray   # [n_vectors, n_completion]


@dataclass
class Policy:
    """Evaluable announcement policy of any supported kind.

    ``q_values`` backs the qmdp kind (shape [A, t_max+1, A, n]); the
    point_based kind keeps per-observable-state alpha sets and falls
    back to deterministic hold-style vectors (see point_based) for
    observable states never touched during solving. Baseline kinds
    carry no value function at all.
    """

    kind: str
    config_fingerprint: str
    t_min: int
    t_max: int
    q_values: np.ndarray | None = None
    alpha_sets: dict[ObservableState, AlphaSet] = field(default_factory=dict)
    cfg: ProblemConfig | None = None

    @property
    def n_completion(self) -> int:
        return self.t_max - self.t_min + 1

    def action_scores(self, x: ObservableState, b: belief_mod.Belief) -> np.ndarray | None:
        """Belief-weighted value per announcement, or None for baselines."""
        if self.kind == "qmdp":
            q = self.q_values[:, x.t, x.prev_announce - self.t_min, :]
            return q @ b.mass
        if self.kind == "point_based":
            from .point_based import point_based_action_scores

            return point_based_action_scores(self, x, b)
        return None

    def act(self, x: ObservableState, b: belief_mod.Belief) -> int:
        if self.kind == "qmdp":
            return select_action(self.action_scores(x, b), x.prev_announce, self.t_min)
        if self.kind == "point_based":
            from .point_based import point_based_action

            return point_based_action(self, x, b)
        raise ValueError(f"policy kind {self.kind!r} has no value function")


def select_action(scores: np.ndarray, prev_announce: int, t_min: int) -> int:
    """Argmax announcement with deterministic tie-breaking.

    Near-equal scores prefer keeping the previous announcement, then the
    smallest announcement.
    """
    best = scores.max()
    tied = scores >= best - ACTION_TIE_TOL
    prev_idx = prev_announce - t_min
    if 0 <= prev_idx < len(scores) and tied[prev_idx]:
        return prev_announce
    return t_min + int(np.argmax(tied))


def _reward_slab(cfg: ProblemConfig, a_val: int) -> np.ndarray:
    """Reward of announcing ``a_val`` for every (t, prev, completion)."""
    values = cfg.completion_values()
    tt = np.arange(cfg.t_max + 1)[:, None, None]
    pv = values[None, :, None]
    yv = values[None, None, :]
    r = -cfg.lambda_e * np.abs(a_val - yv).astype(float)
    r = r - cfg.lambda_c * ((a_val != pv) & (a_val != yv))
    r = r - cfg.lambda_f * ((tt == yv) & (a_val != yv))
    r = np.where(tt == cfg.t_max - 1, 0.0, r)
    r = np.where(tt > yv, 0.0, r)
    return np.ascontiguousarray(np.broadcast_to(r, (cfg.t_max + 1, cfg.n_completion, cfg.n_completion)))


def _expected_next_values(cfg: ProblemConfig, V: np.ndarray, a_idx: int,
                          cap_s: np.ndarray, cap_l: np.ndarray,
                          absorbed: np.ndarray) -> np.ndarray:
    """E[V(next state)] under announcement a for every (t, prev, completion)."""
    T = cfg.t_max
    n = cfg.n_completion
    W = V[1:, a_idx, :]                                   # V at (t+1, a, .) for t = 0..T-1
    ev_nc = W                                             # completion unchanged
    ev_ch = cfg.p_none * W + cfg.p_small * W[:, cap_s] + cfg.p_large * W[:, cap_l]
    keep = (np.arange(n)[None, :, None] == a_idx) | (np.arange(T)[:, None, None] == 0)
    active = np.where(keep, ev_nc[:, None, :], ev_ch[:, None, :])   # [T, P, n]
    frozen = V[:T, a_idx, :][:, None, :]                  # clock stopped, announcement moves
    ev = np.where(absorbed[:T, None, :], frozen, active)
    last = np.broadcast_to(V[T, a_idx, :], (1, n, n))     # t_max is always post-completion
    return np.concatenate([ev, last], axis=0)


def value_iteration(cfg: ProblemConfig, tol: float, max_iter: int,
                    on_sweep: Callable[[int, float, np.ndarray], None] | None = None
                    ) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Dense synchronous value iteration on the flat announcement MDP.

    Returns (V, Q, sweeps, residual) with V shaped [t_max+1, A, n] and
    Q shaped [A, t_max+1, A, n] (announcement-major). The clock only
    moves forward, so the iteration reaches the exact fixed point after
    about t_max sweeps and the residual collapses to zero.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    T = cfg.t_max
    n = cfg.n_completion
    values = cfg.completion_values()
    cap_s = np.minimum(values + cfg.delta_small, cfg.t_max) - cfg.t_min
    cap_l = np.minimum(values + cfg.delta_large, cfg.t_max) - cfg.t_min
    absorbed = np.arange(T + 1)[:, None] >= values[None, :]          # [T+1, n]
    rewards = [_reward_slab(cfg, cfg.t_min + ai) for ai in range(n)]

    V = np.zeros((T + 1, n, n))
    sweeps = 0
    residual = np.inf
    while sweeps < max_iter:
        V_new = np.full_like(V, -np.inf)
        for ai in range(n):
            q_a = rewards[ai] + cfg.discount * _expected_next_values(cfg, V, ai, cap_s, cap_l, absorbed)
            np.maximum(V_new, q_a, out=V_new)
        residual = float(np.abs(V_new - V).max())
        V = V_new
        sweeps += 1
        if on_sweep is not None:
            on_sweep(sweeps, residual, V)
        if residual < tol:
            break

    Q = np.empty((n, T + 1, n, n))
    for ai in range(n):
        Q[ai] = rewards[ai] + cfg.discount * _expected_next_values(cfg, V, ai, cap_s, cap_l, absorbed)
    return V, Q, sweeps, residual


def solve_qmdp(cfg: ProblemConfig, tol: float = 1e-6, max_iter: int = 10_000) -> tuple[Policy, SolveReport]:
    """Value-iteration policy acting greedily on belief-weighted Q values."""
    start = time.perf_counter()
    _, Q, sweeps, residual = value_iteration(cfg, tol, max_iter)
    report = SolveReport(
        iterations=sweeps,
        residual=residual,
        wall_time=time.perf_counter() - start,
        converged=residual < tol,
    )
    policy = Policy(
        kind="qmdp",
        config_fingerprint=cfg.fingerprint(),
        t_min=cfg.t_min,
        t_max=cfg.t_max,
        q_values=Q,
        cfg=cfg,
    )
    return policy, report


def solve_point_based(cfg: ProblemConfig, precision: float = 1e-3,
                      time_budget: float = 600.0,
                      max_iterations: int | None = None) -> tuple[Policy, SolveReport]:
    from .point_based import solve_point_based as _solve

    return _solve(cfg, precision=precision, time_budget=time_budget,
                  max_iterations=max_iterations)


def baseline_policy(kind: str, cfg: ProblemConfig) -> Policy:
    if kind not in ("last_observed", "most_likely"):
        raise ValueError(f"not a baseline kind: {kind!r}")
    return Policy(kind=kind, config_fingerprint=cfg.fingerprint(),
                  t_min=cfg.t_min, t_max=cfg.t_max, cfg=cfg)


def _alpha_entries(policy: Policy) -> list[dict]:
    if policy.kind == "qmdp":
        flat = policy.q_values.reshape(policy.q_values.shape[0], -1)
        return [
            {"action": policy.t_min + ai, "values": [float(v) for v in flat[ai]]}
            for ai in range(flat.shape[0])
        ]
    if policy.kind == "point_based":
        entries = []
        for x in sorted(policy.alpha_sets, key=lambda s: (s.t, s.prev_announce)):
            aset = policy.alpha_sets[x]
            for action, vec in zip(aset.actions, aset.vectors):
                entries.append({
                    "action": int(action),
                    "observable": [int(x.t), int(x.prev_announce)],
                    "values": [float(v) for v in vec],
                })
        return entries
    return []


def save_policy(policy: Policy, path) -> None:
    envelope = {
        "version": POLICY_FORMAT_VERSION,
        "kind": policy.kind,
        "config_fingerprint": policy.config_fingerprint,
        "alphas": _alpha_entries(policy),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope, fh)
        fh.write("\n")


def load_policy(path, cfg: ProblemConfig) -> Policy:
    """Read a policy file and bind it to ``cfg``.

    The file's fingerprint must match the configuration the policy will
    be evaluated against; shape and content errors raise FormatError.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            envelope = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read policy file {path}: {exc}") from exc
    if not isinstance(envelope, dict):
        raise FormatError("policy file must contain a JSON object")
    if envelope.get("version") != POLICY_FORMAT_VERSION:
        raise FormatError(f"unsupported policy format version {envelope.get('version')!r}")
    kind = envelope.get("kind")
    if kind not in POLICY_KINDS:
        raise FormatError(f"unknown policy kind {kind!r}")
    fingerprint = envelope.get("config_fingerprint")
    if fingerprint != cfg.fingerprint():
        raise ConfigMismatch(
            f"policy was solved for config {fingerprint!r}, expected {cfg.fingerprint()!r}")
    alphas = envelope.get("alphas")
    if not isinstance(alphas, list):
        raise FormatError("alphas must be a list")

    policy = Policy(kind=kind, config_fingerprint=fingerprint,
                    t_min=cfg.t_min, t_max=cfg.t_max, cfg=cfg)
    n = cfg.n_completion
    if kind == "qmdp":
        flat_size = (cfg.t_max + 1) * n * n
        if len(alphas) != n:
            raise FormatError(f"qmdp policy needs {n} alpha vectors, found {len(alphas)}")
        q = np.empty((n, cfg.t_max + 1, n, n))
        seen = set()
        for entry in alphas:
            try:
                action = entry["action"]
                vals = entry["values"]
            except (TypeError, KeyError) as exc:
                raise FormatError(f"malformed alpha entry: {entry!r}") from exc
            if not (cfg.t_min <= action <= cfg.t_max) or action in seen:
                raise FormatError(f"bad or duplicate alpha action {action!r}")
            if len(vals) != flat_size:
                raise FormatError(f"alpha for action {action} has {len(vals)} values, want {flat_size}")
            seen.add(action)
            q[action - cfg.t_min] = np.asarray(vals, dtype=float).reshape(cfg.t_max + 1, n, n)
        policy.q_values = q
    elif kind == "point_based":
        grouped: dict[ObservableState, list[tuple[int, list]]] = {}
        for entry in alphas:
            try:
                action = entry["action"]
                t, prev = entry["observable"]
                vals = entry["values"]
            except (TypeError, KeyError, ValueError) as exc:
                raise FormatError(f"malformed alpha entry: {entry!r}") from exc
            if len(vals) != n:
                raise FormatError(f"alpha has {len(vals)} values, want {n}")
            grouped.setdefault(ObservableState(int(t), int(prev)), []).append((int(action), vals))
        for x, items in grouped.items():
            policy.alpha_sets[x] = AlphaSet(
                actions=np.array([a for a, _ in items], dtype=int),
                vectors=np.array([v for _, v in items], dtype=float),
            )
    elif alphas:
        raise FormatError(f"baseline policy kind {kind!r} must not carry alpha vectors")
    return policy
