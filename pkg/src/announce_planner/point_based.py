"""Point-based solver on the factored announcement problem.

The observable (week, previous announcement) pair is enumerated
exactly; alpha vectors span only the hidden completion week. The solver
keeps two bounds on the optimal value at the uniform initial belief: a
lower bound as the best alpha set found so far (seeded with the value
of hold-forever announcement policies) and an upper bound seeded from
the fully observed value tables and tightened by sawtooth interpolation
over backed-up belief points. Exploration walks the reachable belief
tree along upper-bound-greedy announcements and the observation branch
with the largest discount-scaled bound gap, then backs the visited
beliefs up in reverse order.

The reported bounds refer to acting on the uniform prior directly. At
run time the agent additionally conditions on the week-0 estimate
before its first announcement, so alongside the bound-driven walks the
solver also explores from those estimate-corrected week-0 beliefs; the
extra information can only help the executed policy.

Completion is an observable event with known continuation value zero
(announcing the now-revealed completion week is free), so completion
branches terminate the recursion exactly.
"""

from __future__ import annotations

import time
from functools import lru_cache

import numpy as np

from .belief import Belief, initial_belief, most_likely_completion
from .model import ObservableState, ProblemConfig, _delay_matrix, _observation_matrix
from .solvers import AlphaSet, Policy, SolveReport, value_iteration

_TIE_TOL = 1e-12
_MASS_EPS = 1e-15

# A sawtooth point must improve the bound at its own belief by this much
# to be worth keeping.
_UB_IMPROVE_EPS = 1e-9
_MAX_UB_POINTS = 300
_PRUNE_EVERY = 64


def reward_vector(cfg: ProblemConfig, t: int, prev: int, a: int) -> np.ndarray:
    """Reward of announcing ``a`` at week t for every completion hypothesis."""
    n = cfg.n_completion
    if t == cfg.t_max - 1:
        return np.zeros(n)
    yv = cfg.completion_values()
    r = -cfg.lambda_e * np.abs(a - yv).astype(float)
    r -= cfg.lambda_c * ((a != prev) & (a != yv))
    r -= cfg.lambda_f * ((t == yv) & (a != yv))
    return np.where(t > yv, 0.0, r)


def reward_matrix(cfg: ProblemConfig, x: ObservableState) -> np.ndarray:
    """Rows of reward_vector for every announcement at observable x."""
    t, prev = x
    n = cfg.n_completion
    if t == cfg.t_max - 1:
        return np.zeros((n, n))
    yv = cfg.completion_values()
    av = yv[:, None]
    r = -cfg.lambda_e * np.abs(av - yv[None, :]).astype(float)
    r -= cfg.lambda_c * ((av != prev) & (av != yv[None, :]))
    r -= cfg.lambda_f * ((t == yv[None, :]) & (av != yv[None, :]))
    return np.where(t > yv[None, :], 0.0, r)


@lru_cache(maxsize=None)
def _blind_values(cfg: ProblemConfig) -> np.ndarray:
    """Value of announcing a fixed week forever, per (announcement, week, truth).

    Entry [a, t, y] is the discounted return from week t onward when the
    previous announcement is already ``a`` and the agent never changes
    it. Post-completion weeks keep paying the completion-week penalty
    because the clock freezes there, which keeps these values honest
    lower bounds on anything an adaptive policy can do.
    """
    T = cfg.t_max
    n = cfg.n_completion
    yv = cfg.completion_values()
    G = np.zeros((n, T + 1, n))
    for ai in range(n):
        a = cfg.t_min + ai
        err = -cfg.lambda_e * np.abs(a - yv).astype(float)
        r_abs = err - cfg.lambda_f * (a != yv)
        for t in range(T, -1, -1):
            row = np.zeros(n)
            eq = yv == t
            if t != T - 1:
                row[eq] = r_abs[eq] / (1.0 - cfg.discount)
            lt = yv > t
            if lt.any():
                run = np.zeros(n) if t == T - 1 else err
                row[lt] = run[lt] + cfg.discount * G[ai, t + 1, lt]
            G[ai, t] = row
    G.setflags(write=False)
    return G


def seed_alpha_matrix(cfg: ProblemConfig, x: ObservableState) -> np.ndarray:
    """One hold-forever alpha vector per announcement at observable x."""
    n = cfg.n_completion
    t, prev = x
    G = _blind_values(cfg)
    K = _delay_matrix(cfg)
    yv = cfg.completion_values()
    active = yv > t
    out = np.empty((n, n))
    for ai in range(n):
        a = cfg.t_min + ai
        cont = G[ai, t].copy()
        if active.any():
            upstream = G[ai, t + 1]
            moved = K @ upstream if (a != prev and t > 0) else upstream
            cont[active] = moved[active]
        out[ai] = reward_vector(cfg, t, prev, a) + cfg.discount * cont
    return out


def _combined_alphas(policy: Policy, x: ObservableState) -> tuple[np.ndarray, np.ndarray]:
    """Learned alphas for x plus the always-available hold-forever seeds."""
    cfg = policy.cfg
    if cfg is None:
        raise ValueError("point-based policy is not bound to a configuration")
    cache = getattr(policy, "_seed_cache", None)
    if cache is None:
        cache = {}
        setattr(policy, "_seed_cache", cache)
    if x not in cache:
        mat = seed_alpha_matrix(cfg, x)
        cache[x] = (np.arange(cfg.t_min, cfg.t_max + 1), mat)
    seed_actions, seed_mat = cache[x]
    stored = policy.alpha_sets.get(x)
    if stored is None or len(stored.actions) == 0:
        return seed_actions, seed_mat
    actions = np.concatenate([stored.actions, seed_actions])
    vectors = np.vstack([stored.vectors, seed_mat])
    return actions, vectors


def point_based_action_scores(policy: Policy, x: ObservableState, b: Belief) -> np.ndarray:
    """Best alpha value per announcement (used by the advisor's what-if panel)."""
    actions, vectors = _combined_alphas(policy, x)
    vals = vectors @ b.mass
    n = policy.n_completion
    scores = np.full(n, -np.inf)
    for a, v in zip(actions, vals):
        idx = a - policy.t_min
        if v > scores[idx]:
            scores[idx] = v
    return scores


def point_based_action(policy: Policy, x: ObservableState, b: Belief) -> int:
    """Greedy alpha action; a detected completion is announced directly."""
    if b.completed_mass() > 0.5:
        return most_likely_completion(b)
    actions, vectors = _combined_alphas(policy, x)
    vals = vectors @ b.mass
    best = vals.max()
    tied = actions[vals >= best - _TIE_TOL]
    if x.prev_announce in tied:
        return x.prev_announce
    return int(tied.min())


class _XCache:
    """Mutable per-observable-state solver data."""

    __slots__ = ("rewards", "seeds", "learned_actions", "learned_vectors",
                 "lb_stack", "corner", "ub_b", "ub_v", "ub_vc", "ub_stack")

    def __init__(self, rewards: np.ndarray, seeds: np.ndarray, corner: np.ndarray):
        self.rewards = rewards                    # [A, n]
        self.seeds = seeds                        # [A, n]
        self.learned_actions: list[int] = []
        self.learned_vectors: list[np.ndarray] = []
        self.lb_stack: np.ndarray | None = seeds  # lazily rebuilt
        self.corner = corner                      # [n]
        self.ub_b: list[np.ndarray] = []
        self.ub_v: list[float] = []
        self.ub_vc: list[float] = []
        self.ub_stack: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def alphas(self) -> np.ndarray:
        if self.lb_stack is None:
            self.lb_stack = np.vstack([np.vstack(self.learned_vectors), self.seeds])
        return self.lb_stack

    def add_alpha(self, action: int, vec: np.ndarray) -> None:
        self.learned_actions.append(action)
        self.learned_vectors.append(vec)
        self.lb_stack = None

    def ub_points(self):
        if self.ub_stack is None and self.ub_b:
            self.ub_stack = (np.vstack(self.ub_b), np.asarray(self.ub_v), np.asarray(self.ub_vc))
        return self.ub_stack

    def add_ub_point(self, b: np.ndarray, v: float, vc: float) -> None:
        self.ub_b.append(b)
        self.ub_v.append(v)
        self.ub_vc.append(vc)
        self.ub_stack = None


class _Solver:
    def __init__(self, cfg: ProblemConfig, precision: float, time_budget: float,
                 max_iterations: int | None = None):
        self.cfg = cfg
        self.precision = precision
        self.time_budget = time_budget
        self.max_iterations = max_iterations
        self.n = cfg.n_completion
        self.gamma = cfg.discount
        self.K = _delay_matrix(cfg)
        self.values = cfg.completion_values()
        v_mdp, q_mdp, _, _ = value_iteration(cfg, tol=1e-9, max_iter=cfg.t_max + 3)
        self.v_mdp = v_mdp
        self.q_mdp = q_mdp
        self.x_cache: dict[ObservableState, _XCache] = {}
        self.backups = 0

    def _x(self, x: ObservableState) -> _XCache:
        data = self.x_cache.get(x)
        if data is None:
            data = _XCache(
                rewards=reward_matrix(self.cfg, x),
                seeds=seed_alpha_matrix(self.cfg, x),
                corner=self.v_mdp[x.t, x.prev_announce - self.cfg.t_min],
            )
            self.x_cache[x] = data
        return data

    # -- bounds --------------------------------------------------------

    def lb_many(self, x: ObservableState, B: np.ndarray) -> np.ndarray:
        return (B @ self._x(x).alphas().T).max(axis=1)

    def lb_one(self, x: ObservableState, b: np.ndarray) -> float:
        return float(self.lb_many(x, b[None, :])[0])

    def ub_many(self, x: ObservableState, B: np.ndarray) -> np.ndarray:
        data = self._x(x)
        vc = B @ data.corner
        qx = self.q_mdp[:, x.t, x.prev_announce - self.cfg.t_min, :]
        out = np.minimum(vc, (B @ qx.T).max(axis=1))
        pts = data.ub_points()
        if pts is not None:
            P, v, vci = pts
            ratios = np.where(P[:, None, :] > _MASS_EPS,
                              B[None, :, :] / np.maximum(P[:, None, :], _MASS_EPS),
                              np.inf).min(axis=2)                       # [k, m]
            interp = vc[None, :] + (v - vci)[:, None] * ratios
            np.minimum(out, interp.min(axis=0), out=out)
        return out

    def ub_one(self, x: ObservableState, b: np.ndarray) -> float:
        return float(self.ub_many(x, b[None, :])[0])

    def add_ub_point(self, x: ObservableState, b: np.ndarray, v: float) -> None:
        data = self._x(x)
        current = self.ub_one(x, b)
        v = min(v, current)
        if v >= current - _UB_IMPROVE_EPS or len(data.ub_v) >= _MAX_UB_POINTS:
            return
        data.add_ub_point(b.copy(), v, float(b @ data.corner))

    # -- node expansion -------------------------------------------------

    def _action_children(self, x: ObservableState, b: np.ndarray, ai: int):
        """Next-week belief pieces for one announcement.

        Returns (expected reward, next x, joint estimate probabilities,
        normalized child beliefs); the joint probabilities cover the
        no-completion branch only, completion contributes value zero.
        """
        t, prev = x
        a = self.cfg.t_min + ai
        data = self._x(x)
        r = float(data.rewards[ai] @ b)
        b_pred = (b @ self.K) if (a != prev and t > 0) else b
        t1 = t + 1
        x1 = ObservableState(t1, a)
        w = np.where(self.values > t1, b_pred, 0.0)
        if w.sum() <= _MASS_EPS:
            return r, x1, None, None
        Z1 = _observation_matrix(self.cfg, t1)
        C = w[:, None] * Z1
        joint = C.sum(axis=0)
        keep = joint > _MASS_EPS
        children = (C[:, keep] / joint[keep]).T
        return r, x1, joint[keep], children

    def _q_upper(self, x: ObservableState, b: np.ndarray):
        qub = np.empty(self.n)
        detail = []
        for ai in range(self.n):
            r, x1, joint, children = self._action_children(x, b, ai)
            if joint is None:
                qub[ai] = r
                detail.append((x1, None, None))
                continue
            qub[ai] = r + self.gamma * float(joint @ self.ub_many(x1, children))
            detail.append((x1, joint, children))
        return qub, detail

    # -- backup ----------------------------------------------------------

    def backup(self, x: ObservableState, b: np.ndarray) -> None:
        t, prev = x
        t1 = t + 1
        Z1 = _observation_matrix(self.cfg, t1) if t1 <= self.cfg.t_max else None
        data = self._x(x)
        active = self.values > t
        below_next = ~(self.values > t1) if Z1 is not None else None
        best_val = -np.inf
        best_alpha = None
        best_action = None
        ub_best = -np.inf
        for ai in range(self.n):
            a = self.cfg.t_min + ai
            r_vec = data.rewards[ai]
            trigger = a != prev and t > 0
            b_pred = (b @ self.K) if trigger else b
            h = np.zeros(self.n)
            ub_future = 0.0
            if Z1 is not None:
                w = np.where(self.values > t1, b_pred, 0.0)
                if w.sum() > _MASS_EPS:
                    x1 = ObservableState(t1, a)
                    vectors = self._x(x1).alphas()
                    C = w[:, None] * Z1
                    # The alpha choice must cover every estimate branch, even
                    # ones this belief makes negligible: continuations are
                    # nonpositive, so dropping one would inflate the bound.
                    sel = vectors[np.argmax(vectors @ C, axis=0)]   # [n_obs, n]
                    h = (Z1 * sel.T).sum(axis=1)
                    h[below_next] = 0.0
                    joint = C.sum(axis=0)
                    keep = joint > _MASS_EPS
                    children = (C[:, keep] / joint[keep]).T
                    ub_future = float(joint[keep] @ self.ub_many(x1, children))
            cont = (self.K @ h) if trigger else h
            cont = np.where(active, cont, 0.0)
            alpha = r_vec + self.gamma * cont
            val = float(alpha @ b)
            if best_alpha is None or val > best_val + _TIE_TOL:
                best_val = val
                best_alpha = alpha
                best_action = a
            ub_best = max(ub_best, float(r_vec @ b) + self.gamma * ub_future)
        data.add_alpha(best_action, best_alpha)
        self.backups += 1
        if self.backups % _PRUNE_EVERY == 0:
            self._prune(x)
        self.add_ub_point(x, b, ub_best)

    def _prune(self, x: ObservableState) -> None:
        """Drop learned alphas pointwise dominated by another vector at x."""
        data = self._x(x)
        if len(data.learned_vectors) < 2:
            return
        all_vecs = data.alphas()
        keep_a, keep_v = [], []
        for a, v in zip(data.learned_actions, data.learned_vectors):
            dominated = ((all_vecs >= v - 1e-12).all(axis=1)
                         & (all_vecs > v + 1e-12).any(axis=1)).any()
            if not dominated:
                keep_a.append(a)
                keep_v.append(v)
        data.learned_actions = keep_a
        data.learned_vectors = keep_v
        data.lb_stack = None

    # -- exploration ------------------------------------------------------

    def explore(self, x0: ObservableState, b0: np.ndarray, depth0: int = 0) -> None:
        path = [(x0, b0)]
        x, b = x0, b0
        scale = self.gamma ** -depth0 if self.gamma > 0 else 1.0
        depth = depth0
        while depth <= self.cfg.t_max + 1:
            lb = self.lb_one(x, b)
            ub = self.ub_one(x, b)
            if ub - lb <= self.precision * scale:
                break
            qub, detail = self._q_upper(x, b)
            ai = int(np.argmax(qub))
            x1, joint, children = detail[ai]
            if joint is None:
                break
            child_scale = scale / self.gamma if self.gamma > 0 else np.inf
            gaps = self.ub_many(x1, children) - self.lb_many(x1, children)
            excess = joint * (gaps - self.precision * child_scale)
            oi = int(np.argmax(excess))
            if excess[oi] <= 0:
                break
            x, b = x1, children[oi]
            path.append((x, b))
            depth += 1
            scale = child_scale
        for x_i, b_i in reversed(path):
            self.backup(x_i, b_i)

    def _corrected_roots(self, x0: ObservableState, b0: np.ndarray):
        """Week-0 estimate-corrected beliefs and their probabilities."""
        Z0 = _observation_matrix(self.cfg, x0.t)
        C = b0[:, None] * Z0
        weights = C.sum(axis=0)
        keep = weights > _MASS_EPS
        return weights[keep], (C[:, keep] / weights[keep]).T

    def solve(self) -> tuple[Policy, SolveReport]:
        start = time.perf_counter()
        cfg = self.cfg
        b0 = initial_belief(cfg)
        x0, mass0 = b0.observable, np.asarray(b0.mass)
        weights0, corrected = self._corrected_roots(x0, mass0)
        iterations = 0
        lb = self.lb_one(x0, mass0)
        ub = self.ub_one(x0, mass0)
        while ub - lb > self.precision and time.perf_counter() - start < self.time_budget:
            if self.max_iterations is not None and iterations >= self.max_iterations:
                break
            self.explore(x0, mass0)
            # Walk from the estimate-corrected week-0 belief with the
            # largest weighted gap so the executed policy is trained on
            # the beliefs it will actually face.
            gaps = self.ub_many(x0, corrected) - self.lb_many(x0, corrected)
            oi = int(np.argmax(weights0 * gaps))
            if weights0[oi] * gaps[oi] > 0:
                self.explore(x0, corrected[oi])
            iterations += 1
            lb = self.lb_one(x0, mass0)
            ub = self.ub_one(x0, mass0)
        alpha_sets = {
            x: AlphaSet(actions=np.asarray(data.learned_actions, dtype=int),
                        vectors=np.vstack(data.learned_vectors))
            for x, data in self.x_cache.items()
            if data.learned_actions
        }
        policy = Policy(
            kind="point_based",
            config_fingerprint=cfg.fingerprint(),
            t_min=cfg.t_min,
            t_max=cfg.t_max,
            alpha_sets=alpha_sets,
            cfg=cfg,
        )
        report = SolveReport(
            iterations=iterations,
            residual=float(ub - lb),
            wall_time=time.perf_counter() - start,
            converged=bool(ub - lb <= self.precision),
            bounds=(float(lb), float(ub)),
        )
        return policy, report


def solve_point_based(cfg: ProblemConfig, precision: float = 1e-3,
                      time_budget: float = 600.0,
                      max_iterations: int | None = None) -> tuple[Policy, SolveReport]:
    """Anytime bounded solve; stops at the precision gap, the wall-clock
    budget, or the optional deterministic iteration cap, whichever first."""
    if not precision > 0:
        raise ValueError("precision must be positive")
    return _Solver(cfg, precision, time_budget, max_iterations).solve()
