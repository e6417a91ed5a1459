"""How well do 64 rays predict what a full photo would capture?

The planner scores candidates with a sparse ray bundle and fills in the
gaps with a Gaussian process.  Here the sparse estimate is compared with
dense visibility behind a partial occluder.

    python demos/02_gp_coverage.py
"""

import numpy as np

from nbvphoto.scenario import load_scenario
from nbvphoto.validation import gp_fidelity

sc = load_scenario("one_obstacle_2d")
pose = (57.0, 37.0)
rmse, mu, truth = gp_fidelity(sc, pose, rays=64)

print(f"camera at {pose}, {sc.target.m} target coordinates, RMSE {rmse:.3f}\n")
print("     x   truth   GP estimate")
xs = sc.target.coords[:, 0]
for i in range(0, sc.target.m, 3):
    bar = "#" * int(round(20 * mu[i]))
    print(f"{xs[i]:6.1f}   {int(truth[i])}      {mu[i]:5.2f} {bar}")
print(f"\nvisible fraction {truth.mean():.3f}, GP expects {mu.mean():.3f}")
