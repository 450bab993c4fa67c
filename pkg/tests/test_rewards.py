import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxlab.rewards import (NoveltyGrid, RewardBreakdown, discounted_returns,
                             normalize_advantages, reward_exploration_step,
                             reward_goal_step, reward_social)
from fluxlab.world import Outcome


class TestGoalReward:
    def test_approaching_weight_5(self):
        rb = reward_goal_step(5.0, 4.8, Outcome.RUNNING)
        assert rb.r_progress == pytest.approx(1.0, abs=1e-12)

    def test_receding_weight_2(self):
        rb = reward_goal_step(4.8, 5.0, Outcome.RUNNING)
        assert rb.r_progress == pytest.approx(-0.4, abs=1e-12)

    def test_timeout_penalty_scales_with_distance(self):
        rb = reward_goal_step(6.0, 6.0, Outcome.TIMEOUT)
        assert rb.r_term == pytest.approx(-3.0, abs=1e-12)

    def test_success_bonus_20(self):
        rb = reward_goal_step(1.2, 0.9, Outcome.SUCCESS)
        assert rb.r_goal == 20.0

    def test_stuck_penalty(self):
        rb = reward_goal_step(3.0, 3.0, Outcome.STUCK)
        assert rb.r_term == -2.0

    def test_total_is_component_sum(self):
        rb = reward_goal_step(5.0, 4.5, Outcome.SUCCESS)
        rb.r_social = -0.3
        assert rb.total == pytest.approx(
            rb.r_goal + rb.r_progress + rb.r_social + rb.r_expl + rb.r_novelty + rb.r_term)


class TestSocialReward:
    def test_intimate_zone(self):
        assert reward_social([0.4]) == pytest.approx(-0.5, abs=1e-12)

    def test_outside_comfort(self):
        assert reward_social([1.5]) == 0.0

    def test_linear_ramp_midpoint(self):
        assert reward_social([0.825]) == pytest.approx(-0.05, abs=1e-12)

    def test_sums_over_pedestrians(self):
        assert reward_social([0.4, 0.4, 1.5]) == pytest.approx(-1.0, abs=1e-12)

    def test_boundary_at_comfort_is_zero(self):
        assert reward_social([1.2]) == 0.0

    @given(st.lists(st.floats(0.0, 5.0), max_size=15))
    def test_nonpositive_and_bounded(self, dists):
        r = reward_social(dists)
        assert r <= 0.0
        assert r >= -0.5 * max(len(dists), 1)


class TestExplorationReward:
    def test_first_visit_example(self):
        grid = NoveltyGrid()
        rb = reward_exploration_step((0.05, 0.0), (0, 0), grid)
        assert rb.total == pytest.approx(0.2 + 2.0 - 0.05, abs=1e-12)

    def test_novelty_sequence(self):
        grid = NoveltyGrid()
        vals = [reward_exploration_step((0, 0), (3, 4), grid).r_novelty for _ in range(4)]
        assert vals == [2.0, pytest.approx(0.2), 0.0, 0.0]

    def test_new_cell_bonus_equals_half_meter_motion(self):
        grid = NoveltyGrid()
        bonus = reward_exploration_step((0, 0), (1, 1), grid).r_novelty
        assert bonus == pytest.approx(4.0 * 0.5)

    def test_cell_indexing(self):
        grid = NoveltyGrid()
        assert grid.cell_of((0.2, 0.7)) == (0, 1)
        assert grid.cell_of((-0.1, -0.6)) == (-1, -2)


class TestReturns:
    def test_hand_summation(self):
        G = discounted_returns([1.0, 1.0, 1.0], gamma=0.99)
        assert G[2] == pytest.approx(1.0, abs=1e-12)
        assert G[1] == pytest.approx(1.99, abs=1e-12)
        assert G[0] == pytest.approx(2.9701, abs=1e-12)

    def test_gamma_zero_memoryless(self):
        r = [0.3, -1.0, 2.0]
        assert np.allclose(discounted_returns(r, gamma=0.0), r)

    def test_zero_rewards(self):
        assert np.all(discounted_returns(np.zeros(10)) == 0.0)


class TestAdvantages:
    def test_hand_zscore_population_std(self):
        A = normalize_advantages([1.0, 2.0, 3.0])
        want = (np.array([1.0, 2.0, 3.0]) - 2.0) / np.std([1.0, 2.0, 3.0])
        assert np.allclose(A, want, atol=1e-12)
        assert A[0] == pytest.approx(-1.224744871391589, abs=1e-9)

    def test_constant_returns_zeroed(self):
        assert np.all(normalize_advantages([2.0, 2.0, 2.0]) == 0.0)

    def test_outlier_clips_to_three(self):
        G = [0.0] * 50 + [1000.0]
        A = normalize_advantages(G)
        assert A[-1] == 3.0

    @settings(max_examples=50)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=64))
    def test_preclip_mean_zero_std_one(self, G):
        G = np.asarray(G)
        if np.std(G) < 1e-6:
            assert np.all(normalize_advantages(G) == 0.0)
            return
        z = (G - G.mean()) / G.std()
        assert abs(z.mean()) < 1e-9
        assert abs(z.std() - 1.0) < 1e-9
        A = normalize_advantages(G)
        assert np.all(A <= 3.0) and np.all(A >= -3.0)
        inside = (z > -3.0) & (z < 3.0)
        assert np.allclose(A[inside], z[inside], atol=1e-12)
