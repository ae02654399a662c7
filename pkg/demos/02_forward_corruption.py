"""Watch the forward process absorb a token sequence into MASK.

Each step keeps a token with probability beta_t and otherwise masks it; once
masked a token stays masked. After t steps a token survives with alpha_t.
"""

import numpy as np

from artdiff import BinSpec, PoseSE3, build_schedule, encode_pose, forward_trajectory

schedule = build_schedule(20, "cosine")
x0 = encode_pose([PoseSE3.identity()], [0.1, 0.2, 0.05], BinSpec(), ("prismatic",) * 3)
traj = forward_trajectory(x0, schedule, np.random.default_rng(0))

for t, x in enumerate(traj):
    row = " ".join("  ." if v == 0 else f"{v:3d}" for v in x.values)
    alpha = schedule.alpha_at(t)
    print(f"t={t:2d} alpha={alpha:5.3f}  {row}")
