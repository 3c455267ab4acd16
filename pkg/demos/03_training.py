"""
Training a policy with four black-box methods
=============================================

With the design fixed, the policy has two weights.  We count how many
evaluations each method needs before a single policy reaches the light in all
four corners.  Runs that never get there count as the full budget.
"""

from photoland.dynamics import Design, SimConfig, default_environments
from photoland.optimize import METHODS, censored_mean, train_design

envs = default_environments()
cfg = SimConfig()
budget = 300
seeds = range(3)

designs = {
    "wide front corners": Design((0.5, 0.5), (0.5, -0.5)),
    "front corners (baseline)": Design.baseline(),
}

# %%
for name, design in designs.items():
    print(name)
    for method in METHODS:
        runs = train_design(design, method, envs, cfg, budget, seeds)
        hits = [r.evals_to_full_success for r in runs]
        print(f"  {method:6s} evals to success {hits}  censored mean {censored_mean(runs):.0f}")

# %%
# The baseline never solves more than two corners with one policy, so every
# run is censored.  That is catastrophic interference: improving one corner
# costs another.
