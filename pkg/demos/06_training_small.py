"""A miniature training run end to end, through the library API.

Run:  python demos/06_training_small.py   (about half a minute)

Full-scale runs go through the command line instead:
    marlshield train --runs 5 --out out/
    marlshield train --runs 5 --no-shield --out out/
    marlshield report --dir out/
"""

import numpy as np

from marlshield.barriers import ShieldParams
from marlshield.maddpg import MaddpgTrainer, TrainerConfig
from marlshield.patrol import PatrolEnv, default_world

config = TrainerConfig(
    episodes=40,
    episode_len=100,
    batch_size=32,
    warmup_transitions=200,
    update_every=8,
    actor_hidden=(32, 32),
    critic_hidden=(32, 32),
    seed=3,
)

for shielded in (True, False):
    env = PatrolEnv(default_world(), ShieldParams(), episode_len=config.episode_len)
    trainer = MaddpgTrainer(env, config, shield_enabled=shielded)
    rows = trainer.train()
    label = "shielded" if shielded else "unshielded"
    total_collisions = sum(r["collisions_step"] for r in rows)
    collision_eps = sum(r["collisions_episode"] for r in rows)
    worst = min(r["min_dist"] for r in rows)
    early = np.mean([r["reward_I"] + r["reward_II"] for r in rows[:10]])
    late = np.mean([r["reward_I"] + r["reward_II"] for r in rows[-10:]])
    print(f"[{label}]")
    print(f"  collision episodes: {collision_eps}/{len(rows)}  (step-level: {total_collisions})")
    print(f"  closest approach anywhere in training: {worst:.4f}")
    print(f"  mean total reward, first 10 episodes: {early:8.0f}")
    print(f"  mean total reward, last 10 episodes:  {late:8.0f}")
    print()
