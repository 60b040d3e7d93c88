from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from announce_planner.model import DEFAULTS, ProblemConfig
from announce_planner.sweep import (
    DEFAULT_GRID,
    SweepPoint,
    baseline_points,
    dominates,
    pareto_frontier,
    pareto_sweep,
    write_sweep_csv,
)

from oracles import pairwise_frontier_oracle


def point(e, c, le=1.0, lc=1.0):
    return SweepPoint(lambda_e=le, lambda_c=lc, mean_error=e, mean_changes=c,
                      mean_cumulative_error=e, solver_converged=True)


class TestParetoFrontier:
    def test_mutually_nondominated_points_all_retained(self):
        pts = [point(1, 5), point(2, 3), point(3, 1)]
        assert pareto_frontier(pts) == sorted(pts, key=lambda p: p.mean_error)

    def test_dominated_point_removed(self):
        pts = [point(1, 5), point(1, 6)]
        assert pareto_frontier(pts) == [point(1, 5)]

    def test_duplicate_coordinates_keep_smallest_weights(self):
        pts = [point(1, 5, le=2.0, lc=1.0), point(1, 5, le=1.0, lc=3.0)]
        frontier = pareto_frontier(pts)
        assert len(frontier) == 1
        assert (frontier[0].lambda_e, frontier[0].lambda_c) == (1.0, 3.0)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            pareto_frontier([])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=12))
    def test_matches_pairwise_oracle(self, coords):
        pts = [point(float(e), float(c), le=float(i), lc=0.0)
               for i, (e, c) in enumerate(coords)]
        frontier = pareto_frontier(pts)
        expected_idx = pairwise_frontier_oracle([(p.mean_error, p.mean_changes) for p in pts])
        expected_coords = {(pts[i].mean_error, pts[i].mean_changes) for i in expected_idx}
        assert {(p.mean_error, p.mean_changes) for p in frontier} == expected_coords
        # every excluded point is dominated by a frontier point
        kept = {(p.lambda_e, p.lambda_c) for p in frontier}
        for p in pts:
            if (p.lambda_e, p.lambda_c) not in kept:
                assert any(dominates(q, p) or
                           (q.mean_error == p.mean_error and q.mean_changes == p.mean_changes)
                           for q in frontier)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=12))
    def test_idempotent(self, coords):
        pts = [point(float(e), float(c), le=float(i), lc=0.0)
               for i, (e, c) in enumerate(coords)]
        frontier = pareto_frontier(pts)
        assert pareto_frontier(frontier) == frontier

    def test_frontier_sorted_by_error(self):
        pts = [point(3, 1), point(1, 5), point(2, 3)]
        errors = [p.mean_error for p in pareto_frontier(pts)]
        assert errors == sorted(errors)


class TestParetoSweep:
    def test_grid_cell_count(self, tiny5_cfg):
        points = pareto_sweep(tiny5_cfg, [0.5, 2.0], n_runs=5, master_seed=1)
        assert len(points) == 4
        assert [(p.lambda_e, p.lambda_c) for p in points] == [
            (0.5, 0.5), (0.5, 2.0), (2.0, 0.5), (2.0, 2.0)]

    def test_default_grid_yields_64_cells(self):
        assert len(DEFAULT_GRID) == 8
        assert len([(le, lc) for le in DEFAULT_GRID for lc in DEFAULT_GRID]) == 64

    def test_identical_cells_identical_points(self, tiny5_cfg):
        points = pareto_sweep(tiny5_cfg, [1.0, 1.0], n_runs=5, master_seed=1)
        assert points[0] == points[1] == points[2] == points[3]

    def test_worker_count_does_not_change_results(self, tiny5_cfg):
        serial = pareto_sweep(tiny5_cfg, [0.5, 2.0], n_runs=5, master_seed=1, workers=1)
        parallel = pareto_sweep(tiny5_cfg, [0.5, 2.0], n_runs=5, master_seed=1, workers=2)
        assert serial == parallel

    def test_rejects_empty_grid(self, tiny5_cfg):
        with pytest.raises(ValueError):
            pareto_sweep(tiny5_cfg, [], n_runs=5, master_seed=1)

    def test_baselines_ignore_reward_weights(self, tiny5_cfg):
        from dataclasses import replace

        a = baseline_points(tiny5_cfg, n_runs=20, master_seed=3)
        b = baseline_points(replace(tiny5_cfg, lambda_e=0.5, lambda_c=20.0),
                            n_runs=20, master_seed=3)
        assert a == b

    def test_csv_columns(self, tiny5_cfg, tmp_path):
        points = pareto_sweep(tiny5_cfg, [0.5, 2.0], n_runs=3, master_seed=1)
        frontier = pareto_frontier(points)
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, points, frontier)
        lines = path.read_text().splitlines()
        assert lines[0] == "lambda_e,lambda_c,mean_error,mean_changes,on_frontier"
        assert len(lines) == 5
        assert all(line.split(",")[-1] in ("0", "1") for line in lines[1:])
