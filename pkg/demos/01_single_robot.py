"""
One robot, four starting corners
================================

A two-sensor vehicle drives toward a light at the origin.  Each sensor reads
the inverse squared distance to the light; the left motor is driven by the
right sensor and vice versa through two weights.  Here we roll out one design
and one policy from each of the four corners and look at what the sensors saw.
"""

import numpy as np

from photoland.dynamics import Design, Policy, SimConfig, default_environments, evaluate, simulate
from photoland.stats import design_dtw_score

# %%
# A symmetric design with both sensors at the front edge, and a policy that
# crosses excitation over: each sensor pushes the opposite wheel forward.
design = Design((0.5, 0.5), (0.5, -0.5))
policy = Policy(0.8, 0.8)
envs = default_environments()
cfg = SimConfig(record_sensors=True, sensor_stride=40)

for start in envs:
    res = simulate(design, policy, start, cfg)
    print(f"start ({start.x:+.2f}, {start.y:+.2f}): success={res.success} "
          f"steps={res.steps_taken:5d} min distance={res.min_distance:.3f}")

# %%
# The training loss sums each corner's shortfall to the light.  A policy that
# reaches the light everywhere has loss zero.
ev = evaluate(design, policy, envs, SimConfig())
print("per-environment loss:", np.round(ev.losses, 4), "total:", round(ev.total_loss, 4))

# %%
# Sensor homeostasis: how alike are the light signals across the corners?
# Lower DTW means the robot "sees" the four environments more similarly.
results = [simulate(design, policy, s, cfg) for s in envs]
score = design_dtw_score(results)
print("DTW per sensor:", np.round(score.per_sensor, 2), "aggregate:", round(score.aggregate, 2))
