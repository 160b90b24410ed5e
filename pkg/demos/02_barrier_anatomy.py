"""What the braking-distance barriers measure and when their rows bite.

Run:  python demos/02_barrier_anatomy.py
"""

import math

import numpy as np

from marlshield.barriers import (
    ShieldParams,
    cbf_condition_residual,
    cooperative_constraint,
    h_cooperative,
    h_noncooperative,
    noncooperative_constraint,
)
from marlshield.dynamics import AgentState, ObstacleSpec

params = ShieldParams()
print(f"safe distance d_s={params.d_s}, caps {params.a_max_self}/{params.a_max_other}, "
      f"gammas {params.gamma_coo}/{params.gamma_non}, sensing {params.r_sense}\n")

print("== cooperative barrier vs closing speed (separation 0.5) ==")
for closing in (0.0, 0.5, 1.0, 1.3, 1.5):
    h = h_cooperative([0.5, 0.0], [-closing, 0.0], params)
    tag = "safe" if h > 0 else "VIOLATED (shield would brake)"
    print(f"  closing {closing:4.1f}: h = {h:+.3f}  {tag}")

print("\n== barrier value vs separation (head-on at 0.8) ==")
for r in (1.0, 0.6, 0.4, 0.3, 0.25):
    h = h_cooperative([r, 0.0], [-0.8, 0.0], params)
    print(f"  separation {r:4.2f}: h = {h:+.3f}")

print("\n== the emitted rows ==")
a = AgentState([0.0, 0.0], [0.6, 0.0])
b = AgentState([0.5, 0.0], [-0.6, 0.0])
con = cooperative_constraint(a, b, params)
print(f"  pair row: normal={con.normal}, bound={con.bound:.4f} (half of the pairwise budget)")
print(f"  full-throttle approach u=(1,0): lhs={float(con.normal @ [1, 0]):+.4f} "
      f"{'violates -> correction' if float(con.normal @ [1, 0]) > con.bound else 'fits'}")

obs = ObstacleSpec([0.4, 0.0])
agent = AgentState([0.0, 0.0], [0.7, 0.0])
row = noncooperative_constraint(agent, obs, params)
print(f"  obstacle row: normal={row.normal}, bound={row.bound:.4f} (no split, obstacle will not help)")

print("\n== the growth condition the rows encode ==")
h = 0.8
for h_dot in (0.0, -0.1, -params.gamma_coo * h**3, -2 * params.gamma_coo * h**3):
    r = cbf_condition_residual(h, h_dot, params.gamma_coo)
    status = "ok" if r <= 1e-12 else "violated"
    print(f"  h={h}, h_dot={h_dot:+.4f}: residual {r:+.4f} ({status})")
print("\nresidual <= 0 exactly when the reciprocal barrier grows slower than its allowance")
