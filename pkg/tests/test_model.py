from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from announce_planner.model import (
    ConfigError,
    DEFAULTS,
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

from oracles import observation_pmf_hp


def dist_as_dict(cfg, dist):
    return {cfg.t_min + i: p for i, p in enumerate(dist) if p > 0}


@st.composite
def configs(draw):
    t_min = draw(st.integers(2, 4))
    t_max = draw(st.integers(t_min + 1, t_min + 6))
    p_none = draw(st.floats(0.05, 0.9))
    p_small = draw(st.floats(0.05, 1.0 - p_none))
    delta_small = draw(st.integers(1, 2))
    delta_large = delta_small + draw(st.integers(1, 3))
    return ProblemConfig(
        t_min=t_min, t_max=t_max, discount=draw(st.floats(0.0, 0.99)),
        lambda_e=draw(st.floats(0, 20)), lambda_c=draw(st.floats(0, 5)),
        lambda_f=draw(st.floats(0, 2000)),
        p_none=p_none, p_small=p_small, p_large=1.0 - (p_none + p_small),
        delta_small=delta_small, delta_large=delta_large,
    )


class TestProblemConfig:
    def test_presets_match_expected_horizons(self):
        assert preset_config("small").t_max == 13
        assert preset_config("medium").t_max == 26
        assert preset_config("large").t_max == 39
        assert preset_config("extra-large").t_max == 52
        assert preset_config("extra_large").t_max == 52

    def test_defaults(self, small_cfg):
        assert small_cfg.discount == 0.98
        assert (small_cfg.lambda_e, small_cfg.lambda_c, small_cfg.lambda_f) == (8.0, 2.0, 1000.0)
        assert (small_cfg.p_none, small_cfg.p_small, small_cfg.p_large) == (0.5, 0.4, 0.1)
        assert (small_cfg.delta_small, small_cfg.delta_large) == (1, 3)

    def test_rejects_bad_horizon(self):
        with pytest.raises(ConfigError):
            ProblemConfig(t_min=1, t_max=10, **DEFAULTS)
        with pytest.raises(ConfigError):
            ProblemConfig(t_min=5, t_max=5, **DEFAULTS)

    def test_rejects_bad_probabilities(self):
        bad = dict(DEFAULTS, p_none=0.5, p_small=0.4, p_large=0.2)
        with pytest.raises(ConfigError):
            ProblemConfig(t_min=2, t_max=10, **bad)

    def test_rejects_bad_deltas(self):
        bad = dict(DEFAULTS, delta_small=3, delta_large=3)
        with pytest.raises(ConfigError):
            ProblemConfig(t_min=2, t_max=10, **bad)

    def test_rejects_unknown_and_missing_fields(self, small_cfg):
        doc = dict(t_min=2, t_max=13, **DEFAULTS)
        assert config_from_dict(doc) == small_cfg
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict(dict(doc, horizon=3))
        doc.pop("discount")
        with pytest.raises(ConfigError, match="missing"):
            config_from_dict(doc)

    def test_load_config_roundtrip(self, tmp_path, small_cfg):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(dict(t_min=2, t_max=13, **DEFAULTS)))
        assert load_config(path) == small_cfg
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_fingerprint_distinguishes_configs(self, small_cfg, medium_cfg):
        assert small_cfg.fingerprint() != medium_cfg.fingerprint()
        assert small_cfg.fingerprint() == preset_config("small").fingerprint()


class TestObservationDistribution:
    def test_unimodal_at_truth_with_unit_sigma(self):
        cfg = preset_config("extra-large")
        dist = observation_distribution(cfg, ObservableState(19, 10), 22)
        d = dist_as_dict(cfg, dist)
        assert max(d, key=d.get) == 22
        assert abs(sum(d.values()) - 1.0) < 1e-12
        # sigma = (22 - 19) / 3 = 1: symmetric decay on interior bins
        assert d[21] == pytest.approx(d[23], rel=1e-9)
        assert d[20] == pytest.approx(d[24], rel=1e-9)
        assert d[22] > d[21] > d[20]

    def test_point_mass_at_completion(self):
        cfg = preset_config("extra-large")
        dist = observation_distribution(cfg, ObservableState(22, 10), 22)
        assert dist_as_dict(cfg, dist) == {22: 1.0}

    def test_point_mass_after_completion(self):
        cfg = preset_config("extra-large")
        dist = observation_distribution(cfg, ObservableState(30, 10), 22)
        assert dist_as_dict(cfg, dist) == {22: 1.0}

    def test_matches_high_precision_oracle(self):
        cfg = preset_config("extra-large")
        dist = observation_distribution(cfg, ObservableState(16, 10), 22)
        expected = observation_pmf_hp(cfg, 16, 22)
        np.testing.assert_allclose(dist, expected, atol=1e-9)

    def test_oracle_agreement_across_states(self, tiny6_cfg):
        for t in range(0, 7):
            for y in range(2, 7):
                dist = observation_distribution(tiny6_cfg, ObservableState(t, 3), y)
                expected = observation_pmf_hp(tiny6_cfg, t, y)
                np.testing.assert_allclose(dist, expected, atol=1e-9)

    def test_rejects_out_of_range_states(self, tiny_cfg):
        with pytest.raises(ValueError):
            observation_distribution(tiny_cfg, ObservableState(9, 2), 3)
        with pytest.raises(ValueError):
            observation_distribution(tiny_cfg, ObservableState(1, 2), 7)

    @settings(max_examples=60, deadline=None)
    @given(configs(), st.data())
    def test_properties(self, cfg, data):
        t = data.draw(st.integers(0, cfg.t_max))
        y = data.draw(st.integers(cfg.t_min, cfg.t_max))
        prev = data.draw(st.integers(cfg.t_min, cfg.t_max))
        dist = observation_distribution(cfg, ObservableState(t, prev), y)
        assert abs(dist.sum() - 1.0) < 1e-12
        assert (dist >= 0).all()
        sigma = (y - t) / 3.0
        if cfg.t_min + 1 <= y <= cfg.t_max - 1 and sigma > 1e-6:
            assert cfg.t_min + int(np.argmax(dist)) == y


class TestTransitions:
    def test_observable_advances_before_completion(self, medium_cfg):
        assert transition_observable(medium_cfg, ObservableState(5, 20), 22, 24) == (6, 24)
        assert transition_observable(medium_cfg, ObservableState(0, 10), 10, 10) == (1, 10)

    def test_observable_freezes_after_completion(self, medium_cfg):
        assert transition_observable(medium_cfg, ObservableState(22, 22), 22, 22) == (22, 22)
        assert transition_observable(medium_cfg, ObservableState(23, 22), 22, 24) == (23, 24)

    def test_hidden_delay_kernel(self):
        cfg = preset_config("extra-large")
        dist = transition_hidden(cfg, ObservableState(10, 24), 22, 23)
        assert dist_as_dict(cfg, dist) == pytest.approx({22: 0.5, 23: 0.4, 25: 0.1})

    def test_hidden_unchanged_when_keeping_announcement(self):
        cfg = preset_config("extra-large")
        dist = transition_hidden(cfg, ObservableState(10, 24), 22, 24)
        assert dist_as_dict(cfg, dist) == {22: 1.0}

    def test_hidden_unchanged_at_start_and_after_completion(self):
        cfg = preset_config("extra-large")
        assert dist_as_dict(cfg, transition_hidden(cfg, ObservableState(0, 24), 22, 30)) == {22: 1.0}
        assert dist_as_dict(cfg, transition_hidden(cfg, ObservableState(25, 24), 22, 30))  == {22: 1.0}

    def test_capped_delay_targets_merge(self):
        cfg = preset_config("extra-large")
        dist = transition_hidden(cfg, ObservableState(10, 24), 51, 23)
        assert dist_as_dict(cfg, dist) == pytest.approx({51: 0.5, 52: 0.5})

    @settings(max_examples=60, deadline=None)
    @given(configs(), st.data())
    def test_hidden_distribution_properties(self, cfg, data):
        t = data.draw(st.integers(0, cfg.t_max))
        y = data.draw(st.integers(cfg.t_min, cfg.t_max))
        prev = data.draw(st.integers(cfg.t_min, cfg.t_max))
        a = data.draw(st.integers(cfg.t_min, cfg.t_max))
        dist = transition_hidden(cfg, ObservableState(t, prev), y, a)
        assert abs(dist.sum() - 1.0) < 1e-12
        if a == prev:
            assert dist[y - cfg.t_min] == 1.0
        x_next = transition_observable(cfg, ObservableState(t, prev), y, a)
        assert x_next.t == (t if t >= y else t + 1)
        assert x_next.prev_announce == a


class TestReward:
    def test_error_and_change_penalty(self, medium_cfg):
        assert reward(medium_cfg, ObservableState(5, 24), 22, 20) == -8 * 2 - 2

    def test_zero_for_holding_correct_announcement(self, medium_cfg):
        assert reward(medium_cfg, ObservableState(5, 22), 22, 22) == 0.0

    def test_final_miss_penalty(self, medium_cfg):
        assert reward(medium_cfg, ObservableState(22, 20), 22, 20) == -8 * 2 - 1000

    def test_change_to_truth_is_exempt(self, medium_cfg):
        assert reward(medium_cfg, ObservableState(5, 24), 22, 22) == 0.0

    def test_zero_at_second_to_last_week(self, medium_cfg):
        assert reward(medium_cfg, ObservableState(25, 20), 26, 10) == 0.0

    def test_zero_strictly_after_completion(self, medium_cfg):
        assert reward(medium_cfg, ObservableState(23, 20), 22, 10) == 0.0

    @settings(max_examples=80, deadline=None)
    @given(configs(), st.data())
    def test_never_positive(self, cfg, data):
        t = data.draw(st.integers(0, cfg.t_max))
        y = data.draw(st.integers(cfg.t_min, cfg.t_max))
        prev = data.draw(st.integers(cfg.t_min, cfg.t_max))
        a = data.draw(st.integers(cfg.t_min, cfg.t_max))
        r = reward(cfg, ObservableState(t, prev), y, a)
        assert r <= 0.0
        if a == y and a == prev and t < y:
            assert r == 0.0


class TestStateEnumeration:
    def test_cardinality(self, tiny_cfg):
        assert len(enumerate_states(tiny_cfg)) == 5 * 3 * 3

    def test_row_major_origin(self, tiny_cfg):
        space = enumerate_states(tiny_cfg)
        assert space.index(ObservableState(0, 2), 2) == 0
        assert space.index(ObservableState(0, 2), 3) == 1
        assert space.index(ObservableState(0, 3), 2) == 3

    def test_bijection(self, tiny_cfg):
        space = enumerate_states(tiny_cfg)
        for i in range(len(space)):
            x, y = space.state(i)
            assert space.index(x, y) == i
        listed = list(space)
        assert len(listed) == len(space)
        assert listed[0] == (ObservableState(0, 2), 2)

    def test_out_of_range_index(self, tiny_cfg):
        space = enumerate_states(tiny_cfg)
        with pytest.raises(IndexError):
            space.state(len(space))
