"""Two agents orderd straight at each other, with and without the filter.

Run:  python demos/04_shield_headon.py
Writes demo_out/headon.svg (shielded paths curve and stop; naive ones cross).
"""

import math
from pathlib import Path

import numpy as np

from marlshield.barriers import ShieldParams
from marlshield.dynamics import AgentState, WorldConfig, step_agent
from marlshield.shield import filter_action
from marlshield.svgplot import render_arena

OUT = Path("demo_out")
OUT.mkdir(exist_ok=True)

params = ShieldParams()
world = WorldConfig(wall_half_extent=2.0)


def rollout(shielded: bool, steps=60):
    states = [AgentState([-0.8, 0.0], [0, 0]), AgentState([0.8, 0.0], [0, 0])]
    paths = [[states[0].position], [states[1].position]]
    min_dist = math.inf
    corrections = 0
    for _ in range(steps):
        new = []
        for i, s in enumerate(states):
            to_other = states[1 - i].position - s.position
            nominal = to_other / np.linalg.norm(to_other)  # full throttle at the peer
            if shielded:
                u, report = filter_action(i, nominal, s, list(enumerate(states)), [], world, params)
                corrections += report.status != "passthrough"
            else:
                u = nominal
            new.append(step_agent(s, u, world.dt, world.v_max))
        # minimum separation along the step, not just at the sample instants
        # (a naive pair can tunnel straight through each other between samples)
        p0a, p0b = paths[0][-1], paths[1][-1]
        p1a, p1b = new[0].position, new[1].position
        for tau in np.linspace(0.0, 1.0, 11):
            qa = p0a + tau * (p1a - p0a)
            qb = p0b + tau * (p1b - p0b)
            min_dist = min(min_dist, float(np.linalg.norm(qa - qb)))
        states = new
        paths[0].append(states[0].position)
        paths[1].append(states[1].position)
    return paths, min_dist, corrections


naive_paths, naive_min, _ = rollout(shielded=False)
safe_paths, safe_min, corrections = rollout(shielded=True)

print(f"naive head-on: min separation {naive_min:.4f}  (safe distance is {params.d_s})")
print(f"shielded:      min separation {safe_min:.4f}  with {corrections} filter interventions")

svg = render_arena(
    world,
    {
        "agent 1 (shielded)": np.array(safe_paths[0]),
        "agent 2 (shielded)": np.array(safe_paths[1]),
        "agent 1 (naive)": np.array(naive_paths[0]),
        "agent 2 (naive)": np.array(naive_paths[1]),
    },
    d_s=params.d_s,
    title="head-on approach: filtered vs naive",
)
(OUT / "headon.svg").write_text(svg)
print(f"wrote {OUT / 'headon.svg'}")
