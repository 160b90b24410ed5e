"""Two-patrolman task: one agent wanders, the other works a check-in circuit.

The arena is a square wall with static point obstacles and five ordered
check-in points. Rewards count nearby entities (the other agent and the
obstacles, never the walls): each one contributes -50 while at or below
the safe distance and +50 otherwise, upgraded to +100 for the check-in
patrolman while it sits within the critical distance of its current
target. Collisions are accounted per step as any entity separation at or
below the safe distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barriers import ShieldParams
from .dynamics import AgentState, WorldConfig, face_clearances, step_agent

PATROLMAN_I = 0  # random patrol, no target term
PATROLMAN_II = 1  # check-in circuit

REWARD_COLLISION = -50.0
REWARD_CLEAR = 50.0
REWARD_CHECKIN = 100.0

N_AGENTS = 2


@dataclass(frozen=True, eq=False)
class EnvState:
    """Joint snapshot; checkin_index wraps forward-only through the circuit."""

    agents: tuple[AgentState, AgentState]
    checkin_index: int = 0
    checkins_reached: int = 0
    step_count: int = 0


@dataclass(frozen=True, eq=False)
class TrajectoryRow:
    """One agent at one step, matching the trajectory CSV schema."""

    step: int
    agent_id: int
    position: np.ndarray
    velocity: np.ndarray
    u_nominal: np.ndarray
    u_safe: np.ndarray
    reward: float
    min_entity_distance: float
    shield_status: str
    checkins_reached: int = 0


@dataclass(frozen=True)
class EpisodeMetrics:
    total_reward: tuple[float, float]
    collision_count: int
    min_pairwise_distance: float
    checkins_reached: int
    shield_correction_count: int


class CrowdedWorldError(RuntimeError):
    """Reset rejection sampling exhausted: the world leaves no room to spawn."""


class PatrolEnv:
    """Deterministic episode mechanics; all randomness enters through reset(seed)."""

    def __init__(
        self,
        world: WorldConfig,
        shield_params: ShieldParams,
        episode_len: int = 200,
        d_c: float = 0.05,
        reset_margin: float = 0.05,
    ):
        if episode_len < 0:
            raise ValueError("episode_len must be >= 0")
        if len(world.checkin_points) == 0:
            raise ValueError("world must define at least one check-in point")
        self.world = world
        self.params = shield_params
        self.episode_len = episode_len
        self.d_c = d_c
        self.reset_margin = reset_margin

    @property
    def n_agents(self) -> int:
        return N_AGENTS

    @property
    def obs_dim(self) -> int:
        # self pos + self vel + other rel + obstacles rel + target rel
        return 8 + 2 * len(self.world.obstacles)

    def reset(self, seed) -> tuple[EnvState, list[np.ndarray]]:
        """Spawn both agents at rest, uniformly in the wall, clear of everything.

        Placements keep every agent/agent, agent/obstacle, and agent/wall
        separation above d_s + reset_margin; 1000 consecutive rejections
        raise CrowdedWorldError.
        """
        rng = np.random.default_rng(seed)
        e = self.world.wall_half_extent
        clearance = self.params.d_s + self.reset_margin
        placed: list[np.ndarray] = []
        attempts = 0
        while len(placed) < N_AGENTS:
            pos = rng.uniform(-e, e, size=2)
            attempts += 1
            if attempts > 1000:
                raise CrowdedWorldError(
                    f"could not place {N_AGENTS} agents with clearance {clearance} in 1000 draws"
                )
            if e - abs(pos[0]) <= clearance or e - abs(pos[1]) <= clearance:
                continue
            if any(
                math.hypot(pos[0] - o.position[0], pos[1] - o.position[1]) - o.radius <= clearance
                for o in self.world.obstacles
            ):
                continue
            if any(math.hypot(pos[0] - p[0], pos[1] - p[1]) <= clearance for p in placed):
                continue
            placed.append(pos)
        agents = tuple(AgentState(p, np.zeros(2)) for p in placed)
        state = EnvState(agents=agents)
        return state, self.observe(state)

    def observe(self, state: EnvState) -> list[np.ndarray]:
        obs = []
        target = self.world.checkin_points[state.checkin_index]
        for i, agent in enumerate(state.agents):
            other = state.agents[1 - i]
            parts = [agent.position, agent.velocity, other.position - agent.position]
            parts += [o.position - agent.position for o in self.world.obstacles]
            if i == PATROLMAN_II:
                parts.append(target - agent.position)
            else:
                parts.append(np.zeros(2))
            obs.append(np.concatenate(parts))
        return obs

    def entity_distances(self, state: EnvState, agent_idx: int) -> list[float]:
        """Clearances to every entity within sensing range (same range the shield uses)."""
        agent = state.agents[agent_idx]
        px, py = float(agent.position[0]), float(agent.position[1])
        out = []
        other = state.agents[1 - agent_idx]
        d = math.hypot(px - other.position[0], py - other.position[1])
        if d <= self.params.r_sense:
            out.append(d)
        for o in self.world.obstacles:
            d = math.hypot(px - o.position[0], py - o.position[1])
            if d <= self.params.r_sense:
                out.append(d - o.radius)
        return out

    def min_entity_distance(self, state: EnvState, agent_idx: int) -> float:
        dists = self.entity_distances(state, agent_idx)
        return min(dists) if dists else math.inf

    def step(self, state: EnvState, actions) -> tuple[EnvState, list[np.ndarray], np.ndarray, bool]:
        """Integrate both agents, score rewards, advance the check-in circuit."""
        acts = np.asarray(actions, dtype=float).reshape(N_AGENTS, 2)
        if not np.all(np.isfinite(acts)):
            raise ValueError("actions must be finite")
        if np.max(np.abs(acts)) > self.world.a_max + 1e-9:
            raise ValueError(
                f"action components must lie within +-{self.world.a_max}, got {acts!r}"
            )
        agents = tuple(
            step_agent(agent, acts[i], self.world.dt, self.world.v_max)
            for i, agent in enumerate(state.agents)
        )
        moved = EnvState(
            agents=agents,
            checkin_index=state.checkin_index,
            checkins_reached=state.checkins_reached,
            step_count=state.step_count + 1,
        )

        target = self.world.checkin_points[state.checkin_index]
        p2 = agents[PATROLMAN_II].position
        target_dist = math.hypot(p2[0] - target[0], p2[1] - target[1])
        at_target = target_dist <= self.d_c

        rewards = np.zeros(N_AGENTS)
        for i in range(N_AGENTS):
            for d in self.entity_distances(moved, i):
                if d <= self.params.d_s:
                    rewards[i] += REWARD_COLLISION
                elif i == PATROLMAN_II and at_target:
                    rewards[i] += REWARD_CHECKIN
                else:
                    rewards[i] += REWARD_CLEAR

        checkin_index = state.checkin_index
        checkins_reached = state.checkins_reached
        if at_target:
            checkin_index = (checkin_index + 1) % len(self.world.checkin_points)
            checkins_reached += 1

        new_state = EnvState(
            agents=agents,
            checkin_index=checkin_index,
            checkins_reached=checkins_reached,
            step_count=moved.step_count,
        )
        done = (
            new_state.step_count >= self.episode_len
            or checkins_reached >= len(self.world.checkin_points)
        )
        return new_state, self.observe(new_state), rewards, done


def collision_audit(trajectory, d_s: float = 0.075) -> EpisodeMetrics:
    """Aggregate one episode's rows into its metrics.

    A collision step is any step whose minimum entity separation is at or
    below d_s; an empty trajectory yields zeroed counts.
    """
    rows = list(trajectory)
    totals = {PATROLMAN_I: 0.0, PATROLMAN_II: 0.0}
    collision_steps = set()
    min_dist = math.inf
    checkins = 0
    corrections = 0
    for row in rows:
        totals[row.agent_id] = totals.get(row.agent_id, 0.0) + row.reward
        if row.min_entity_distance <= d_s:
            collision_steps.add(row.step)
        min_dist = min(min_dist, row.min_entity_distance)
        checkins = max(checkins, row.checkins_reached)
        if row.shield_status in ("corrected", "relaxed", "fallback"):
            corrections += 1
    return EpisodeMetrics(
        total_reward=(totals[PATROLMAN_I], totals[PATROLMAN_II]),
        collision_count=len(collision_steps),
        min_pairwise_distance=min_dist,
        checkins_reached=checkins,
        shield_correction_count=corrections,
    )


def default_world() -> WorldConfig:
    """The stock 2x2 arena: three point obstacles between the check-in legs."""
    from .dynamics import ObstacleSpec

    return WorldConfig(
        wall_half_extent=1.0,
        obstacles=(
            ObstacleSpec(position=np.array([-0.35, 0.0])),
            ObstacleSpec(position=np.array([0.35, 0.25])),
            ObstacleSpec(position=np.array([0.0, -0.45])),
        ),
        checkin_points=(
            np.array([0.7, 0.7]),
            np.array([0.7, -0.7]),
            np.array([-0.7, -0.7]),
            np.array([-0.7, 0.7]),
            np.array([0.0, 0.0]),
        ),
        dt=0.1,
        v_max=1.0,
        a_max=1.0,
    )
