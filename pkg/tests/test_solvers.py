from __future__ import annotations

import json

import numpy as np
import pytest

from announce_planner.belief import Belief, initial_belief
from announce_planner.model import DEFAULTS, ObservableState, ProblemConfig, enumerate_states
from announce_planner.point_based import seed_alpha_matrix
from announce_planner.sim import run_batch
from announce_planner.solvers import (
    ConfigMismatch,
    FormatError,
    baseline_policy,
    load_policy,
    save_policy,
    select_action,
    solve_point_based,
    solve_qmdp,
    value_iteration,
)


def random_belief(cfg, rng, t=None, prev=None):
    t = int(rng.integers(0, cfg.t_max)) if t is None else t
    prev = int(rng.integers(cfg.t_min, cfg.t_max + 1)) if prev is None else prev
    raw = rng.random(cfg.n_completion)
    mask = np.arange(cfg.t_min, cfg.t_max + 1) > t
    raw = np.where(mask, raw, 0.0)
    if raw.sum() == 0:
        raw = mask.astype(float)
    return Belief(ObservableState(t, prev), raw / raw.sum(), cfg.t_min)


def qmdp_value_at_initial_belief(policy, cfg) -> float:
    b0 = initial_belief(cfg)
    q0 = policy.q_values[:, 0, 0, :]
    return float((q0 @ b0.mass).max())


class TestQmdp:
    def test_matches_dense_oracle_tiny(self, tiny_cfg):
        from oracles import dense_qmdp_oracle

        policy, report = solve_qmdp(tiny_cfg)
        assert report.converged
        oracle = dense_qmdp_oracle(tiny_cfg)
        space = enumerate_states(tiny_cfg)
        got = np.stack([
            policy.q_values[:, x.t, x.prev_announce - tiny_cfg.t_min, y - tiny_cfg.t_min]
            for x, y in space
        ])
        np.testing.assert_allclose(got, oracle, atol=1e-9)

    def test_value_monotone_nonincreasing_from_zero(self, tiny6_cfg):
        history = []
        value_iteration(tiny6_cfg, tol=1e-6, max_iter=50,
                        on_sweep=lambda i, r, V: history.append(V.copy()))
        prev = np.zeros_like(history[0])
        for V in history:
            assert (V <= prev + 1e-12).all()
            prev = V

    def test_zero_weights_converge_immediately(self):
        cfg = ProblemConfig(t_min=2, t_max=6, **dict(DEFAULTS, lambda_e=0.0, lambda_c=0.0, lambda_f=0.0))
        policy, report = solve_qmdp(cfg)
        assert report.iterations == 1
        assert report.residual == 0.0
        assert np.all(policy.q_values == 0.0)

    def test_point_mass_belief_acts_mdp_greedy(self, small_cfg):
        policy, _ = solve_qmdp(small_cfg)
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = int(rng.integers(0, small_cfg.t_max))
            prev = int(rng.integers(small_cfg.t_min, small_cfg.t_max + 1))
            y = int(rng.integers(small_cfg.t_min, small_cfg.t_max + 1))
            mass = np.zeros(small_cfg.n_completion)
            mass[y - small_cfg.t_min] = 1.0
            b = Belief(ObservableState(t, prev), mass, small_cfg.t_min)
            a = policy.act(b.observable, b)
            q_row = policy.q_values[:, t, prev - small_cfg.t_min, y - small_cfg.t_min]
            assert select_action(q_row, prev, small_cfg.t_min) == a

    def test_values_finite_and_nonpositive(self, small_cfg):
        policy, _ = solve_qmdp(small_cfg)
        assert np.isfinite(policy.q_values).all()
        rng = np.random.default_rng(7)
        for _ in range(100):
            b = random_belief(small_cfg, rng)
            scores = policy.action_scores(b.observable, b)
            assert scores.max() <= 1e-9

    def test_rejects_nonpositive_tol(self, tiny_cfg):
        with pytest.raises(ValueError):
            value_iteration(tiny_cfg, tol=0.0, max_iter=5)


class TestActionTieBreaking:
    def test_prefers_previous_announcement(self):
        scores = np.array([0.0, 0.0, -1.0])
        assert select_action(scores, prev_announce=3, t_min=2) == 3

    def test_falls_back_to_smallest(self):
        scores = np.array([-5.0, 0.0, 0.0])
        assert select_action(scores, prev_announce=2, t_min=2) == 3


class TestPointBased:
    def test_bounds_ordered_and_capped_by_qmdp(self, tiny_cfg):
        qmdp, _ = solve_qmdp(tiny_cfg)
        policy, report = solve_point_based(tiny_cfg, precision=1e-3, time_budget=5.0)
        lower, upper = report.bounds
        assert lower <= upper + 1e-9
        assert upper <= qmdp_value_at_initial_belief(qmdp, tiny_cfg) + 1e-6

    def test_infinite_precision_returns_initial_bounds(self, small_cfg):
        policy, report = solve_point_based(small_cfg, precision=float("inf"), time_budget=60.0)
        assert report.iterations == 0
        assert report.converged
        lower, upper = report.bounds
        assert lower <= upper
        assert not policy.alpha_sets

    def test_bounds_monotone_across_iteration_caps(self, tiny_cfg):
        lowers, uppers = [], []
        for cap in (0, 1, 2, 4, 8, 16):
            _, report = solve_point_based(tiny_cfg, precision=1e-9, time_budget=60.0,
                                          max_iterations=cap)
            lowers.append(report.bounds[0])
            uppers.append(report.bounds[1])
        for a, b in zip(lowers, lowers[1:]):
            assert b >= a - 1e-9
        for a, b in zip(uppers, uppers[1:]):
            assert b <= a + 1e-9

    def test_simulated_return_consistent_with_lower_bound(self, tiny_cfg):
        policy, report = solve_point_based(tiny_cfg, precision=1e-3, time_budget=10.0)
        summaries, _ = run_batch(tiny_cfg, {"pb": policy}, 10_000, master_seed=11)
        s = summaries["pb"]
        se = s.std_reward / np.sqrt(s.n_episodes)
        assert s.mean_reward >= report.bounds[0] - 3 * se

    def test_seed_alphas_are_nonpositive(self, tiny6_cfg):
        for t in range(0, tiny6_cfg.t_max):
            mat = seed_alpha_matrix(tiny6_cfg, ObservableState(t, 3))
            assert np.isfinite(mat).all()
            assert (mat <= 1e-12).all()

    def test_rejects_nonpositive_precision(self, tiny_cfg):
        with pytest.raises(ValueError):
            solve_point_based(tiny_cfg, precision=0.0)


class TestPersistence:
    def test_qmdp_roundtrip_identical_actions(self, tiny6_cfg, tmp_path):
        policy, _ = solve_qmdp(tiny6_cfg)
        path = tmp_path / "qmdp.json"
        save_policy(policy, path)
        loaded = load_policy(path, tiny6_cfg)
        rng = np.random.default_rng(5)
        for _ in range(1000):
            b = random_belief(tiny6_cfg, rng)
            assert loaded.act(b.observable, b) == policy.act(b.observable, b)

    def test_point_based_roundtrip_identical_actions(self, tiny_cfg, tmp_path):
        policy, _ = solve_point_based(tiny_cfg, precision=1e-3, time_budget=5.0)
        path = tmp_path / "pb.json"
        save_policy(policy, path)
        loaded = load_policy(path, tiny_cfg)
        assert set(loaded.alpha_sets) == set(policy.alpha_sets)
        rng = np.random.default_rng(6)
        for _ in range(1000):
            b = random_belief(tiny_cfg, rng)
            assert loaded.act(b.observable, b) == policy.act(b.observable, b)

    def test_baseline_roundtrip(self, tiny_cfg, tmp_path):
        policy = baseline_policy("most_likely", tiny_cfg)
        path = tmp_path / "ml.json"
        save_policy(policy, path)
        loaded = load_policy(path, tiny_cfg)
        assert loaded.kind == "most_likely"

    def test_tampered_fingerprint_rejected(self, tiny_cfg, tmp_path):
        policy, _ = solve_qmdp(tiny_cfg)
        path = tmp_path / "qmdp.json"
        save_policy(policy, path)
        doc = json.loads(path.read_text())
        doc["config_fingerprint"] = "0" * 64
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigMismatch):
            load_policy(path, tiny_cfg)

    def test_mismatched_config_rejected(self, tiny_cfg, tiny6_cfg, tmp_path):
        policy, _ = solve_qmdp(tiny_cfg)
        path = tmp_path / "qmdp.json"
        save_policy(policy, path)
        with pytest.raises(ConfigMismatch):
            load_policy(path, tiny6_cfg)

    def test_truncated_file_rejected(self, tiny_cfg, tmp_path):
        policy, _ = solve_qmdp(tiny_cfg)
        path = tmp_path / "qmdp.json"
        save_policy(policy, path)
        raw = path.read_text()
        path.write_text(raw[: len(raw) // 2])
        with pytest.raises(FormatError):
            load_policy(path, tiny_cfg)

    def test_wrong_version_rejected(self, tiny_cfg, tmp_path):
        path = tmp_path / "pol.json"
        path.write_text(json.dumps({"version": 99, "kind": "qmdp",
                                    "config_fingerprint": tiny_cfg.fingerprint(), "alphas": []}))
        with pytest.raises(FormatError):
            load_policy(path, tiny_cfg)

    def test_wrong_alpha_shape_rejected(self, tiny_cfg, tmp_path):
        path = tmp_path / "pol.json"
        path.write_text(json.dumps({
            "version": 1, "kind": "qmdp",
            "config_fingerprint": tiny_cfg.fingerprint(),
            "alphas": [{"action": 2, "values": [0.0, 1.0]}],
        }))
        with pytest.raises(FormatError):
            load_policy(path, tiny_cfg)
