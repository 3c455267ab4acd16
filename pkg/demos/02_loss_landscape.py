"""
Loss landscapes over policy space
=================================

For a fixed design we roll out every policy on a weight grid in each of the
four environments.  Summing the four binary success maps gives the overlap
matrix: cells at 4 are generalist policies, cells at 1 to 3 are specialists.
Two numbers summarise it: learnability ``m_l`` (share of generalist cells)
and interference resistance ``m_ci`` (generalists over all cells that solve
anything).
"""

import numpy as np

from photoland.dynamics import Design, SimConfig, default_environments
from photoland.landscape import GridSpec, metrics_from_tensor, overlap, success_tensor

spec = GridSpec(weight_bins=21)
envs = default_environments()
cfg = SimConfig()

designs = {
    "front corners (baseline)": Design.baseline(),
    "wide front corners": Design((0.5, 0.5), (0.5, -0.5)),
    "co-located sensors": Design((0.25, 0.0), (0.25, 0.0)),
    "asymmetric": Design((0.5, 0.25), (0.0, -0.5)),
}

# %%
for name, design in designs.items():
    S = success_tensor(design, envs, spec, cfg)
    m = metrics_from_tensor(design, S)
    print(f"{name:26s} m_l={m.m_l:.4f} m_ci={m.m_ci:.4f} g={m.counts}")

# %%
# The overlap matrix of the wide design, rows w1 and columns w2 from -1 to 1.
# A dot is a policy that solves nothing.
o = overlap(success_tensor(designs["wide front corners"], envs, spec, cfg))
for row in o:
    print("".join("." if v == 0 else str(v) for v in row))
print("weights:", np.round(spec.weight_values()[[0, -1]], 2))
