"""Plan and run one map with every strategy, then write SVG frames of the SAPOA run."""
import sys
from pathlib import Path

from sapoa import KINDS, exemplar_maps, run_one, write_render

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
world = exemplar_maps()[2]
print(f"{world.name}: {len(world.robots)} robots, {len(world.obstacles)} obstacle cells")
for kind in KINDS:
    rec, trace = run_one(world, kind, seed=0)
    steps = f"makespan {rec.makespan}" if rec.success else ""
    print(f"  {kind:10s} {rec.outcome:16s} {steps}")
    if kind == "sapoa" and rec.success:
        paths = write_render(trace, world, out, kind, 0, animate=True)
        print(f"  animation written to {paths[0]}")
