import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stepwalk.errors import InvalidArgument, PlanningFailure
from stepwalk.plan import (GOAL_HIGH, GOAL_LOW, Footstep, FootstepPlan, OccupancyGrid, PlannerParams,
                           apply_stairs, gen_line_plan, gen_stand, gen_turn_in_place, grid_from_text, grid_to_text,
                           load_plan, plan_curved, plan_from_text, plan_to_text, sample_goal, save_plan,
                           walking_axis, wrap_angle)
from stepwalk.task import plan_window


def empty_grid():
    return OccupancyGrid.empty(-1.5, -1.5, 1.5, 1.5, 0.05)


class TestLinePlans:
    def test_forward_example(self):
        p = gen_line_plan("forward", 0.35, 0.15, 4)
        a = p.as_array()
        np.testing.assert_allclose(a[:, 0], [0.35, 0.70, 1.05, 1.40])
        np.testing.assert_array_equal(a[:, 1], [-0.15, 0.15, -0.15, 0.15])
        assert np.all(a[:, 3] == 0.0)
        assert p.sides() == ["right", "left", "right", "left"]

    def test_backward_keeps_forward_heading(self):
        p = gen_line_plan("backward", 0.25, 0.12, 2)
        np.testing.assert_allclose(p.as_array()[:, 0], [-0.25, -0.50])
        assert all(s.heading == 0.0 for s in p.steps)

    def test_single_step(self):
        p = gen_line_plan("forward", 0.35, 0.15, 1)
        assert len(p) == 1 and abs(p[0].y) == 0.15

    @pytest.mark.parametrize("args", [(0.0, 0.15, 3), (0.3, -0.1, 3), (0.3, 0.15, 0), (-1, 0.15, 2)])
    def test_invalid_geometry(self, args):
        with pytest.raises(InvalidArgument):
            gen_line_plan("forward", *args)

    def test_unknown_direction(self):
        with pytest.raises(InvalidArgument):
            gen_line_plan("sideways", 0.3, 0.15, 2)

    @pytest.mark.parametrize("direction", ["lateral+", "lateral-"])
    def test_lateral_offsets(self, direction):
        L, w = 0.2, 0.15
        p = gen_line_plan(direction, L, w, 5)
        sign = 1.0 if direction == "lateral+" else -1.0
        for k, s in enumerate(p.steps, start=1):
            assert s.x == 0.0 and s.heading == 0.0
            assert abs(abs(s.y - sign * k * L) - w) < 1e-12

    @given(st.sampled_from(["forward", "backward", "lateral+", "lateral-"]),
           st.floats(0.05, 0.25), st.floats(0.13, 0.3), st.integers(1, 30))
    def test_alternation_and_axis_offset(self, direction, L, w, n):
        p = gen_line_plan(direction, L, w, n)
        sides = p.sides()
        assert all(a != b for a, b in zip(sides, sides[1:]))
        a = p.as_array()
        if direction in ("forward", "backward"):
            np.testing.assert_allclose(np.abs(a[:, 1]), w)
        assert np.all((a[:, 3] > -math.pi) & (a[:, 3] <= math.pi))


class TestStandAndTurn:
    def test_stand(self):
        p = gen_stand()
        assert p.mode == "stand" and len(p) == 1
        assert p[0].as_array().tolist() == [0.0, 0.0, 0.0, 0.0]
        np.testing.assert_array_equal(plan_window(p, 0), np.zeros((2, 4)))

    def test_turn_quarter(self):
        p = gen_turn_in_place(math.pi / 2, math.pi / 8, 0.15)
        a = p.as_array()
        assert len(p) == 4
        assert a[-1, 3] == pytest.approx(math.pi / 2, abs=1e-12)
        np.testing.assert_allclose(np.hypot(a[:, 0], a[:, 1]), 0.15, atol=1e-12)
        # closed-form layout: step k beside the origin, lead foot on the turning side
        for k, s in enumerate(p.steps, start=1):
            th = k * math.pi / 8
            sg = 1.0 if k % 2 else -1.0
            assert s.x == pytest.approx(-sg * 0.15 * math.sin(th), abs=1e-12)
            assert s.y == pytest.approx(sg * 0.15 * math.cos(th), abs=1e-12)

    def test_turn_clockwise(self):
        p = gen_turn_in_place(-math.pi / 4, -math.pi / 8, 0.12)
        np.testing.assert_allclose(p.as_array()[:, 3], [-math.pi / 8, -math.pi / 4], atol=1e-12)

    def test_turn_zero_is_stand(self):
        assert gen_turn_in_place(0.0, math.pi / 8, 0.15).mode == "stand"

    @pytest.mark.parametrize("yaw_step", [0.0, math.pi / 5])
    def test_turn_bad_step(self, yaw_step):
        with pytest.raises(InvalidArgument):
            gen_turn_in_place(math.pi / 2, yaw_step, 0.15)

    @given(st.floats(-math.pi, math.pi).filter(lambda v: abs(v) > 1e-3), st.floats(0.05, math.pi / 6))
    def test_turn_monotone_headings(self, total, per):
        per = math.copysign(per, total)
        p = gen_turn_in_place(total, per, 0.15)
        h = np.unwrap(p.as_array()[:, 3])
        d = np.diff(np.concatenate([[0.0], h])) * math.copysign(1.0, total)
        assert np.all(d > 0) and np.all(d <= abs(per) + 1e-9)
        assert h[-1] == pytest.approx(total, abs=1e-9)


class TestStairs:
    def test_rise(self):
        p = apply_stairs(gen_line_plan("forward", 0.35, 0.15, 4), 0.10)
        np.testing.assert_allclose(p.as_array()[:, 2], [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(p.as_array()[:, 0], [0.35, 0.7, 1.05, 1.4])
        assert p.mode == "stairs" and p.step_length == 0.35

    def test_zero_rise_identity(self):
        base = gen_line_plan("forward", 0.35, 0.15, 4)
        assert apply_stairs(base, 0.0) == base

    def test_descending(self):
        p = apply_stairs(gen_line_plan("forward", 0.3, 0.15, 3), -0.10)
        np.testing.assert_allclose(p.as_array()[:, 2], [-0.1, -0.2, -0.3])

    def test_rejects_non_line(self):
        with pytest.raises(InvalidArgument):
            apply_stairs(gen_stand(), 0.1)
        with pytest.raises(InvalidArgument):
            apply_stairs(gen_line_plan("lateral+", 0.1, 0.15, 3), 0.1)


class TestCurvedPlanner:
    def test_straight_goal_matches_line_plan(self):
        p = plan_curved(empty_grid(), (0, 0, 0), (1.0, 0, 0))
        line = gen_line_plan("forward", 0.35, 0.15, len(p))
        np.testing.assert_allclose(p.as_array()[:, :2], line.as_array()[:, :2], atol=0.05)

    def test_wall_blocks(self):
        g = empty_grid()
        i, _ = g.to_cell(0.5, 0.0)
        g.cells[:, i] = True
        with pytest.raises(PlanningFailure):
            plan_curved(g, (0, 0, 0), (1.0, 0, 0))

    def test_occupied_goal(self):
        g = empty_grid()
        i, j = g.to_cell(1.0, 0.0)
        g.cells[j, i] = True
        with pytest.raises(InvalidArgument):
            plan_curved(g, (0, 0, 0), (1.0, 0, 0))

    def test_goal_outside(self):
        with pytest.raises(InvalidArgument):
            plan_curved(empty_grid(), (0, 0, 0), (5.0, 0, 0))

    def test_detour_around_obstacle(self):
        g = empty_grid()
        for x in np.arange(0.35, 0.65, 0.05):
            for y in np.arange(-0.5, 0.5, 0.05):
                i, j = g.to_cell(x, y)
                g.cells[j, i] = True
        p = plan_curved(g, (0, 0, 0), (1.1, 0, 0))
        assert all(g.is_free(s.x, s.y) for s in p.steps)
        self._check_plan(p, (1.1, 0, 0))

    def _check_plan(self, p, goal, params=PlannerParams()):
        sides = p.sides()
        assert all(a != b for a, b in zip(sides, sides[1:]))
        axis = np.vstack([[0.0, 0.0, 0.0], walking_axis(p)])
        steps = np.hypot(np.diff(axis[:, 0]), np.diff(axis[:, 1]))
        assert np.all(steps <= params.step_length + 1e-9)
        assert np.all(np.abs(wrap_angle(np.diff(axis[:, 2]))) <= params.max_yaw + 1e-9)
        end = axis[-1]
        assert math.hypot(end[0] - goal[0], end[1] - goal[1]) <= params.goal_tolerance + 1e-9
        assert abs(wrap_angle(end[2] - goal[2])) <= params.goal_yaw_tolerance + 1e-9

    @pytest.mark.parametrize("seed", range(8))
    def test_sampled_goals(self, seed):
        goal = sample_goal(seed)
        self._check_plan(plan_curved(empty_grid(), (0, 0, 0), goal), goal)


class TestGoalSampling:
    def test_bounds(self):
        rng = np.random.default_rng(0)
        g = np.array([sample_goal(rng) for _ in range(10_000)])
        assert np.all(g >= np.array(GOAL_LOW)) and np.all(g <= np.array(GOAL_HIGH))

    def test_deterministic(self):
        assert sample_goal(7) == sample_goal(7)

    def test_mean(self):
        rng = np.random.default_rng(1)
        n = 100_000
        g = np.array([sample_goal(rng) for _ in range(n)])
        half = (np.array(GOAL_HIGH) - np.array(GOAL_LOW)) / 2
        sigma = half / math.sqrt(3.0)
        assert np.all(np.abs(g.mean(axis=0)) <= 3 * sigma / math.sqrt(n) + 1e-15)


steps_strategy = st.lists(
    st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-1, 1), st.floats(-math.pi, math.pi),
              st.sampled_from(["left", "right", "either"])), min_size=1, max_size=12)


class TestSerialization:
    @given(steps_strategy, st.sampled_from(["forward", "curved", "stairs", "turn"]), st.floats(0, 1), st.floats(0, 1))
    def test_round_trip_bit_exact(self, steps, mode, spread, length):
        p = FootstepPlan(tuple(Footstep(*s) for s in steps), mode, spread, length)
        q = plan_from_text(plan_to_text(p))
        assert q == p
        assert plan_to_text(q) == plan_to_text(p)

    def test_file_round_trip(self, tmp_path):
        p = plan_curved(empty_grid(), (0, 0, 0), sample_goal(3))
        save_plan(p, tmp_path / "p.txt")
        assert load_plan(tmp_path / "p.txt") == p

    def test_grid_round_trip(self):
        g = empty_grid()
        g.cells[3:7, 10:12] = True
        h = grid_from_text(grid_to_text(g))
        np.testing.assert_array_equal(h.cells, g.cells)
        assert h.resolution == g.resolution and tuple(h.origin) == tuple(g.origin)

    def test_footstep_wraps_heading(self):
        assert Footstep(0, 0, 0, -math.pi).heading == math.pi
        assert Footstep(0, 0, 0, 3 * math.pi).heading == pytest.approx(math.pi)
