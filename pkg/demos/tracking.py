"""Drive a simulated boat along one robot's dispatch path and report the tracking errors."""
from sapoa import astar, exemplar_maps, plan, simulate_track
from sapoa.continuous_nav import settling_time

world = exemplar_maps()[3]
p = plan(world, "sapoa", seed=0)
robot = 0
goal = p.columns[p.assignment.mapping[robot]]
path = astar([(0, 0)], world.robots[robot], goal, world.obstacles,
             bounds=(world.width, world.height)).waypoints
ct = simulate_track(path)
lat = max(abs(v) for v in ct.column("d_lat"))
print(f"robot {robot}: {len(path)} waypoints from {path[0]} to {path[-1]}, "
      f"{ct.samples[-1]['t']:.0f} s simulated")
print(f"max lateral error {lat:.4f} m, final distance {ct.samples[-1]['d']:.4f} m")

step = simulate_track([(0, 0), (1, 0)], units="meters", duration=20.0)
print(f"1 m step settles within 5 cm after {settling_time(step, 0.05):.2f} s")
