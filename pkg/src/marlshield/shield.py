"""Per-agent safety filter around a nominal action.

For one focal agent the filter gathers the local neighborhood (peers,
obstacles, wall faces within sensing range), builds one linear constraint
per entity, stacks them into a single projection QP, and returns the
filtered action plus a diagnostics report. Stacking enforces membership in
the intersection of all per-entity safe sets, so one solve covers every
nearby hazard at once.

When any entity is already at or below the safe distance, or its barrier
value is nonpositive, no constraint exists for it; the filter then swaps
the nominal action for maximal braking away from the most imminent threat
(the entity with the smallest barrier value) and still projects that
braking through the surviving rows, so an emergency maneuver for one
entity cannot ram another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qp
from .barriers import LinearConstraint, ShieldParams, _row_core
from .dynamics import AgentState, WorldConfig, face_clearances

STATUS_PASSTHROUGH = "passthrough"
STATUS_CORRECTED = "corrected"
STATUS_RELAXED = "relaxed"
STATUS_FALLBACK = "fallback"


@dataclass(frozen=True, eq=False)
class ShieldReport:
    """What the filter did to one action, for per-step diagnostics streams."""

    agent_id: object
    u_nominal: np.ndarray
    u_safe: np.ndarray
    constraints_built: dict = field(default_factory=dict)
    status: str = STATUS_PASSTHROUGH
    min_h: float = math.inf
    slack: float = 0.0


def neighborhood(self_id, all_agents, obstacles, world: WorldConfig, r_sense: float):
    """Entities within sensing range of one agent, in deterministic order.

    Returns (neighbors, obstacles_in_range, wall_faces_in_range); neighbors
    ascend by id, obstacles keep list order, wall faces keep the fixed face
    order. Distances are center-to-center and the comparison is inclusive.
    """
    self_state = None
    peers = []
    for aid, state in all_agents:
        if aid == self_id:
            self_state = state
        else:
            peers.append((aid, state))
    if self_state is None:
        raise ValueError(f"agent {self_id!r} not present in all_agents")
    px, py = float(self_state.position[0]), float(self_state.position[1])

    neighbors = [
        (aid, st)
        for aid, st in sorted(peers, key=lambda item: item[0])
        if math.hypot(px - st.position[0], py - st.position[1]) <= r_sense
    ]
    obstacles_in_range = [
        obs
        for obs in obstacles
        if math.hypot(px - obs.position[0], py - obs.position[1]) <= r_sense
    ]
    wall_faces = [
        (face, point, dist)
        for face, point, dist in face_clearances(self_state.position, world.wall_half_extent)
        if dist <= r_sense
    ]
    return neighbors, obstacles_in_range, wall_faces


def _brake_away(dpx, dpy, a_max):
    r = math.hypot(dpx, dpy)
    if r <= 1e-12:
        return np.array([a_max, 0.0])
    return np.array([a_max * dpx / r, a_max * dpy / r])


def filter_action(
    agent_id,
    u_nominal,
    self_state: AgentState,
    neighbors,
    obstacles,
    world: WorldConfig,
    params: ShieldParams,
) -> tuple[np.ndarray, ShieldReport]:
    """Filter one nominal action through the stacked-constraint QP.

    `neighbors` is the full (id, AgentState) list (the focal agent itself
    may be included and is skipped); range filtering happens here so the
    output provably depends only on local information.
    """
    u_hat = np.asarray(u_nominal, dtype=float).reshape(2)
    if not (math.isfinite(u_hat[0]) and math.isfinite(u_hat[1])):
        raise ValueError(f"nominal action must be finite, got {u_nominal!r}")

    agents = list(neighbors)
    if all(aid != agent_id for aid, _ in agents):
        agents.append((agent_id, self_state))
    near_agents, near_obstacles, wall_faces = neighborhood(
        agent_id, agents, obstacles, world, params.r_sense
    )

    sx, sy = float(self_state.position[0]), float(self_state.position[1])
    vx, vy = float(self_state.velocity[0]), float(self_state.velocity[1])

    constraints: list[LinearConstraint] = []
    built = {"cooperative": 0, "non-cooperative": 0, "wall": 0}
    min_h = math.inf
    worst = None  # (threat value, dpx, dpy) of the most imminent violated entity
    dacc_pair = params.a_max_self + params.a_max_other

    def add_row(dpx, dpy, full, h, kind, cid):
        """Emit the barrier row, or a full-braking recovery row when violated.

        A violated entity (h <= 0 or inside the safe ball) has no valid
        barrier row, but dropping it entirely would let an emergency for
        one entity ram another; the recovery row demands outward radial
        acceleration at the full cap, and the slack phase arbitrates when
        several emergencies genuinely conflict.
        """
        nonlocal worst
        if full is None:
            if worst is None or h < worst[0]:
                worst = (h, dpx, dpy)
            r = math.hypot(dpx, dpy)
            if r > 1e-9:
                # unit normal so simultaneous emergencies trade off evenly
                constraints.append(
                    LinearConstraint(
                        np.array((-dpx / r, -dpy / r)), -params.a_max_self, kind, cid
                    )
                )
                built[kind] += 1
        else:
            constraints.append(LinearConstraint(np.array((-dpx, -dpy)), full, kind, cid))
            built[kind] += 1

    for aid, other in near_agents:
        dpx, dpy = sx - float(other.position[0]), sy - float(other.position[1])
        wx, wy = vx - float(other.velocity[0]), vy - float(other.velocity[1])
        full, h = _row_core(dpx, dpy, wx, wy, params.gamma_coo, dacc_pair, params.d_s, params.margin)
        min_h = min(min_h, h)
        if full is not None:
            full *= 0.5  # half the pairwise bound: the peer enforces the mirror half
        add_row(dpx, dpy, full, h, "cooperative", aid)

    for idx, obs in enumerate(near_obstacles):
        dpx, dpy = sx - float(obs.position[0]), sy - float(obs.position[1])
        full, h = _row_core(
            dpx, dpy, vx, vy, params.gamma_non, params.a_max_self,
            params.d_s + obs.radius, params.margin,
        )
        min_h = min(min_h, h)
        add_row(dpx, dpy, full, h, "non-cooperative", ("obstacle", idx))

    for face, point, dist in wall_faces:
        # A face is a line, not a point: only the normal velocity component
        # matters, and feeding the full vector would credit motion along the
        # wall as curvature away from it. Work in the face-normal subspace.
        dpx, dpy = sx - float(point[0]), sy - float(point[1])
        if face in ("+x", "-x"):
            nvx, nvy = vx, 0.0
        else:
            nvx, nvy = 0.0, vy
        full, h = _row_core(
            dpx, dpy, nvx, nvy, params.gamma_non, params.a_max_self, params.d_s, params.margin
        )
        min_h = min(min_h, h)
        add_row(dpx, dpy, full, h, "wall", ("wall", face))

    # Violated-set fallback: swap the nominal for maximal braking away from
    # the most imminent violator; the recovery and surviving rows then shape
    # the executed action through the same projection.
    fallback = worst is not None
    nominal_used = _brake_away(worst[1], worst[2], params.a_max_self) if fallback else u_hat

    problem = qp.QpProblem(
        nominal=nominal_used,
        constraints=tuple(constraints),
        box=params.a_max_self,
        slack_weight=params.slack_weight,
    )
    sol = qp.solve(problem)

    if sol.status == qp.STATUS_FALLBACK:
        # Iteration-cap exhaustion: substitute braking away from the nearest hazard.
        candidates = [(math.hypot(sx - c[0], sy - c[1]), c) for c in _entity_points(near_agents, near_obstacles, wall_faces)]
        if candidates:
            _, (ex, ey) = min(candidates, key=lambda item: item[0])
            u_safe = _brake_away(sx - ex, sy - ey, params.a_max_self)
        else:
            u_safe = sol.u_safe
        status = STATUS_FALLBACK
    elif fallback:
        u_safe = sol.u_safe
        status = STATUS_FALLBACK
    elif sol.status == qp.STATUS_RELAXED:
        u_safe = sol.u_safe
        status = STATUS_RELAXED
    else:
        u_safe = sol.u_safe
        untouched = float(u_safe[0]) == float(u_hat[0]) and float(u_safe[1]) == float(u_hat[1])
        status = STATUS_PASSTHROUGH if untouched else STATUS_CORRECTED

    report = ShieldReport(
        agent_id=agent_id,
        u_nominal=u_hat,
        u_safe=u_safe,
        constraints_built=built,
        status=status,
        min_h=min_h,
        slack=sol.slack,
    )
    return u_safe, report


def _entity_points(near_agents, near_obstacles, wall_faces):
    points = [(float(st.position[0]), float(st.position[1])) for _, st in near_agents]
    points += [(float(o.position[0]), float(o.position[1])) for o in near_obstacles]
    points += [(float(p[0]), float(p[1])) for _, p, _ in wall_faces]
    return points
