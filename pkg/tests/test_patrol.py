import math

import numpy as np
import pytest

from marlshield.barriers import ShieldParams
from marlshield.dynamics import AgentState, ObstacleSpec, WorldConfig
from marlshield.patrol import (
    PATROLMAN_I,
    PATROLMAN_II,
    CrowdedWorldError,
    EnvState,
    PatrolEnv,
    TrajectoryRow,
    collision_audit,
    default_world,
)
from marlshield.shield import neighborhood

PARAMS = ShieldParams()


def make_env(**kwargs):
    return PatrolEnv(default_world(), PARAMS, **kwargs)


def state_at(p0, p1, v0=(0, 0), v1=(0, 0), checkin_index=0):
    return EnvState(
        agents=(AgentState(p0, v0), AgentState(p1, v1)),
        checkin_index=checkin_index,
    )


class TestReset:
    def test_equal_seeds_identical(self):
        env = make_env()
        s1, o1 = env.reset(123)
        s2, o2 = env.reset(123)
        for a, b in zip(s1.agents, s2.agents):
            assert np.array_equal(a.position, b.position)
        for x, y in zip(o1, o2):
            assert np.array_equal(x, y)

    def test_clearances_and_bounds(self):
        env = make_env()
        world = env.world
        for seed in range(40):
            state, _ = env.reset(seed)
            for i, agent in enumerate(state.agents):
                assert np.all(np.abs(agent.position) <= 1.0)  # inside the 2x2 wall
                assert np.array_equal(agent.velocity, [0, 0])
                for o in world.obstacles:
                    assert math.hypot(*(agent.position - o.position)) > 0.125
                other = state.agents[1 - i]
                assert math.hypot(*(agent.position - other.position)) > 0.125
                assert 1.0 - np.max(np.abs(agent.position)) > 0.125

    def test_crowded_world_error(self):
        tiny = WorldConfig(wall_half_extent=0.13, checkin_points=([0.0, 0.0],))
        env = PatrolEnv(tiny, PARAMS)
        with pytest.raises(CrowdedWorldError):
            env.reset(0)


class TestObservations:
    def test_layout_and_dims(self):
        env = make_env()
        state = state_at([0.1, 0.2], [-0.3, 0.4], v0=(0.5, -0.5))
        obs = env.observe(state)
        assert all(o.shape == (env.obs_dim,) for o in obs)
        assert env.obs_dim == 8 + 2 * len(env.world.obstacles)
        np.testing.assert_allclose(obs[0][:2], [0.1, 0.2])
        np.testing.assert_allclose(obs[0][2:4], [0.5, -0.5])
        np.testing.assert_allclose(obs[0][4:6], [-0.4, 0.2])  # relative peer
        # patrolman I carries a zeroed target slot; II carries the live target
        np.testing.assert_allclose(obs[0][-2:], [0, 0])
        target = env.world.checkin_points[0]
        np.testing.assert_allclose(obs[1][-2:], target - np.array([-0.3, 0.4]))


class TestRewards:
    def test_four_clear_entities_scores_200(self):
        env = make_env()
        state = state_at([0.0, 0.0], [0.5, 0.0])
        # agent I at the center sees the peer and all three obstacles, none colliding
        new_state, _, rewards, _ = env.step(state, np.zeros((2, 2)))
        assert rewards[PATROLMAN_I] == pytest.approx(4 * 50.0)

    def test_contact_contributes_minus_50(self):
        env = make_env()
        near = state_at([0.0, 0.0], [0.07, 0.0])
        _, _, r_near, _ = env.step(near, np.zeros((2, 2)))
        clear = state_at([0.0, 0.0], [0.5, 0.0])
        _, _, r_clear, _ = env.step(clear, np.zeros((2, 2)))
        assert r_near[PATROLMAN_I] == r_clear[PATROLMAN_I] - 100.0  # +50 flipped to -50

    def test_checkin_bonus_counts_per_entity(self):
        world = WorldConfig(
            wall_half_extent=1.0,
            obstacles=(ObstacleSpec([0.3, 0.0]), ObstacleSpec([0.0, 0.3])),
            checkin_points=([0.0, 0.0], [0.5, 0.5]),
        )
        env = PatrolEnv(world, ShieldParams(r_sense=1.0), d_c=0.05)
        state = state_at([-0.5, 0.0], [0.04, 0.0])
        _, _, rewards, _ = env.step(state, np.zeros((2, 2)))
        # three entities in range of II (peer + 2 obstacles), none colliding,
        # target within the critical distance: 3 x 100
        assert rewards[PATROLMAN_II] == pytest.approx(300.0)

    def test_reward_decomposes_per_entity(self):
        env = make_env()
        rng = np.random.default_rng(8)
        for _ in range(50):
            state, _ = env.reset(int(rng.integers(1 << 31)))
            new_state, _, rewards, _ = env.step(state, np.zeros((2, 2)))
            target = env.world.checkin_points[state.checkin_index]
            for i in range(2):
                expected = 0.0
                at_target = (
                    i == PATROLMAN_II
                    and math.hypot(*(new_state.agents[i].position - target)) <= env.d_c
                )
                for d in env.entity_distances(new_state, i):
                    if d <= PARAMS.d_s:
                        expected += -50.0
                    elif at_target:
                        expected += 100.0
                    else:
                        expected += 50.0
                assert rewards[i] == pytest.approx(expected)

    def test_entity_set_matches_shield_neighborhood(self):
        env = make_env()
        rng = np.random.default_rng(9)
        for _ in range(50):
            p0 = rng.uniform(-0.9, 0.9, 2)
            p1 = rng.uniform(-0.9, 0.9, 2)
            state = state_at(p0, p1)
            for i in range(2):
                near_agents, near_obs, _ = neighborhood(
                    i, list(enumerate(state.agents)), env.world.obstacles, env.world, PARAMS.r_sense
                )
                assert len(env.entity_distances(state, i)) == len(near_agents) + len(near_obs)


class TestCheckins:
    def test_advance_and_wrap(self):
        env = make_env()
        state = state_at([-0.9, -0.9], [0.7, 0.7])  # II on the first check-in
        new_state, _, _, done = env.step(state, np.zeros((2, 2)))
        assert new_state.checkin_index == 1
        assert new_state.checkins_reached == 1
        assert not done
        wrapped = state_at([-0.9, -0.9], [0.0, 0.0], checkin_index=4)
        new_state, _, _, _ = env.step(wrapped, np.zeros((2, 2)))
        assert new_state.checkin_index == 0  # wraps after the fifth point

    def test_done_after_all_five(self):
        env = make_env()
        state = EnvState(
            agents=(AgentState([-0.9, -0.9], [0, 0]), AgentState([0.0, 0.0], [0, 0])),
            checkin_index=4,
            checkins_reached=4,
        )
        new_state, _, _, done = env.step(state, np.zeros((2, 2)))
        assert new_state.checkins_reached == 5
        assert done

    def test_done_at_episode_length(self):
        env = make_env(episode_len=3)
        state, _ = env.reset(5)
        done = False
        steps = 0
        while not done:
            state, _, _, done = env.step(state, np.zeros((2, 2)))
            steps += 1
            assert steps <= 3
        assert steps == 3

    def test_index_monotone_within_episode(self):
        env = make_env(episode_len=50)
        state, _ = env.reset(11)
        rng = np.random.default_rng(12)
        seen = state.checkins_reached
        done = False
        while not done:
            state, _, _, done = env.step(state, rng.uniform(-1, 1, (2, 2)))
            assert state.checkins_reached >= seen
            seen = state.checkins_reached


class TestStepValidation:
    def test_rejects_out_of_box_actions(self):
        env = make_env()
        state, _ = env.reset(1)
        with pytest.raises(ValueError):
            env.step(state, np.array([[2.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            env.step(state, np.array([[np.nan, 0.0], [0.0, 0.0]]))


def row(step, agent, reward=0.0, min_dist=1.0, status="passthrough", checkins=0):
    return TrajectoryRow(
        step=step,
        agent_id=agent,
        position=np.zeros(2),
        velocity=np.zeros(2),
        u_nominal=np.zeros(2),
        u_safe=np.zeros(2),
        reward=reward,
        min_entity_distance=min_dist,
        shield_status=status,
        checkins_reached=checkins,
    )


class TestCollisionAudit:
    def test_empty_trajectory_zero_metrics(self):
        m = collision_audit([])
        assert m.collision_count == 0
        assert m.total_reward == (0.0, 0.0)
        assert m.checkins_reached == 0
        assert m.shield_correction_count == 0

    def test_grazing_step_counts_once(self):
        rows = [row(0, 0, min_dist=0.074), row(0, 1, min_dist=0.074), row(1, 0), row(1, 1)]
        m = collision_audit(rows, d_s=0.075)
        assert m.collision_count == 1
        assert m.min_pairwise_distance == pytest.approx(0.074)

    def test_threshold_is_inclusive(self):
        assert collision_audit([row(0, 0, min_dist=0.075)], d_s=0.075).collision_count == 1
        assert collision_audit([row(0, 0, min_dist=0.0751)], d_s=0.075).collision_count == 0

    def test_totals_and_corrections(self):
        rows = [
            row(0, 0, reward=50.0),
            row(0, 1, reward=100.0, status="corrected"),
            row(1, 0, reward=-50.0, status="fallback"),
            row(1, 1, reward=50.0, checkins=2),
        ]
        m = collision_audit(rows)
        assert m.total_reward == (0.0, 150.0)
        assert m.shield_correction_count == 2
        assert m.checkins_reached == 2
