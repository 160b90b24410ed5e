"""Decentralized safety shields for multi-agent actor-critic learners.

The package splits into a simulation core (`dynamics`, `patrol`), the
safety machinery (`barriers`, `qp`, `shield`), the learner (`nets`,
`maddpg`, `checkpoint`), and operator plumbing (`config`, `svgplot`,
`cli`).
"""

from .barriers import (
    InsideUnsafeBall,
    LinearConstraint,
    ShieldParams,
    cbf_condition_residual,
    cooperative_constraint,
    h_cooperative,
    h_noncooperative,
    noncooperative_constraint,
)
from .dynamics import (
    AgentState,
    ObstacleSpec,
    WorldConfig,
    pairwise_distance,
    step_agent,
    wall_clearance,
)
from .maddpg import MaddpgTrainer, ReplayBuffer, TrainerConfig, Transition
from .patrol import EnvState, EpisodeMetrics, PatrolEnv, collision_audit, default_world
from .qp import QpProblem, QpSolution, kkt_check, solve
from .shield import ShieldReport, filter_action, neighborhood

__version__ = "0.1.0"
