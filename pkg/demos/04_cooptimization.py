"""
Co-optimizing body and brain
============================

Here the search treats each environment's loss as its own objective and
keeps an epsilon-box archive of trade-offs.  In free mode it may move the
sensors as well as the weights; in fixed mode only the weights change.  We
compare best-so-far success and follow the DTW homeostasis score of the
incumbent design.
"""

import numpy as np

from photoland.coopt import FIXED, FREE, average_success_curve, coopt_run, incumbent_dtw
from photoland.dynamics import SimConfig, default_environments

envs = default_environments()
cfg = SimConfig()
budget = 400
seeds = range(3)

free = [coopt_run(FREE, envs, cfg, budget, s, score_dtw=True) for s in seeds]
fixed = [coopt_run(FIXED, envs, cfg, budget, s) for s in seeds]

# %%
for label, runs in (("free design", free), ("fixed baseline", fixed)):
    mean, half = average_success_curve(runs)
    print(f"{label:15s} success after 50/200/{budget} evals:",
          [f"{mean[i]:.2f}+-{half[i]:.2f}" for i in (49, 199, budget - 1)])

# %%
# The design the archive currently ranks best, and how alike its four
# sensor experiences are.
for r in free:
    d = incumbent_dtw(r)
    l1, l2 = np.round(r.final.vars[:2], 3), np.round(r.final.vars[2:4], 3)
    print(f"seed {r.seed}: ell1={l1} ell2={l2} DTW first eval {d[0]:.1f} -> last {d[-1]:.1f}")
