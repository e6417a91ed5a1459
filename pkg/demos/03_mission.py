"""A full capture mission around an unknown obstacle.

The robot starts south of the building, maps the obstacle as it drives,
re-optimizes its viewpoint en route and photographs the face until the
coverage mean passes 95%.  An ASCII map shows the trace.

    python demos/03_mission.py [scenario]
"""

import sys

import numpy as np

from nbvphoto.mission import run_mission
from nbvphoto.scenario import load_scenario

name = sys.argv[1] if len(sys.argv) > 1 else "two_face_2d"
sc = load_scenario(name)
log = run_mission(sc)

print(f"{name}: {log.photo_count} photo(s), coverage {log.final_coverage:.4f}, {log.ticks} ticks, "
      f"stop reason '{log.reason}', {log.collisions} collisions")
for i, p in enumerate(log.photos, 1):
    print(f"  photo {i} at tick {p.tick} from {np.round(p.position, 1).tolist()}: "
          f"G={p.score.G:.1f}, coverage {p.coverage_before:.3f} -> {p.coverage_after:.3f}")

if sc.ndim == 2:
    ws = sc.workspace
    canvas = np.full(ws.shape[::-1], ".")
    for b in sc.obstacles:
        lo, hi = ws.cell_of(b.lower)[0], ws.cell_of(b.upper)[0]
        canvas[lo[1]:hi[1] + 1, lo[0]:hi[0] + 1] = "#"
    lo, hi = ws.cell_of(sc.target.lower)[0], ws.cell_of(sc.target.upper)[0]
    canvas[lo[1]:hi[1] + 1, lo[0]:hi[0] + 1] = "T"
    for q in log.trace:
        c = ws.cell_of(q)[0]
        canvas[c[1], c[0]] = "o"
    for p in log.photos:
        c = ws.cell_of(p.position)[0]
        canvas[c[1], c[0]] = "P"
    # crop to the drawn region, north up
    used = np.argwhere(canvas != ".")
    (r0, c0), (r1, c1) = used.min(axis=0) - 2, used.max(axis=0) + 3
    for row in canvas[max(r0, 0):r1][::-1]:
        print("".join(row[max(c0, 0):c1]))
