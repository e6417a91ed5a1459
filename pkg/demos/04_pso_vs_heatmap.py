"""Does the swarm find the same viewpoint as brute force?

The dense heatmap scores every 1 m lattice point exactly; the swarm of 20
particles only ever sees GP estimates.  The distance between the two
optima over a handful of seeds shows how much the estimate costs.

    python demos/04_pso_vs_heatmap.py [seeds]
"""

import sys

from nbvphoto.scenario import load_scenario
from nbvphoto.validation import pso_errors

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
sc = load_scenario("one_obstacle_2d")
errs, ref = pso_errors(sc, seeds)
print(f"heatmap argmax {ref.argmax.tolist()} with G={ref.argmax_score:.2f} "
      f"({len(ref.positions)} feasible of {ref.lattice_size} points)")
for s, e in enumerate(errs):
    print(f"  seed {s}: {e:.3f} m")
print(f"mean {errs.mean():.3f} +/- {errs.std():.3f} m")
