"""Plan with RRT on a small map, then track the plan with and without noise.

On the matched model both controllers reproduce the plan exactly. Under
position noise, open-loop momentum tracking drifts while deadbeat closed-loop
tracking corrects the error every two steps.
"""

import numpy as np

from safeplan.lip import LipState
from safeplan.planner import PlannerConfig, PlanningProblem, rrt_plan
from safeplan.safety import BarrierSpec, Obstacle
from safeplan.tracksim import Mode, TrackingMode, track_closed_loop, track_open_loop
from safeplan.worldmodel import OccupancyGrid, World

cells = np.zeros((32, 32))
cells[10:22, 14:18] = 1.0
grid = OccupancyGrid(cells, 0.25)
obstacle = Obstacle.ellipse((4.0, 4.0), 0.8, 2.0)
problem = PlanningProblem(World(grid), LipState(1.0, 0.3, 1.0, 0.3), barriers=BarrierSpec((obstacle,)))

result = rrt_plan(problem, (7.0, 7.0), PlannerConfig(max_samples=400, rng_seed=1))
print(f"{len(result.tree)} nodes after {result.samples} samples, path of {len(result.path)} steps")

for noise in (0.0, 1e-3):
    o = track_open_loop(result.path, problem.params, TrackingMode(Mode.OPEN_LOOP, noise, seed=0))
    c = track_closed_loop(result.path, problem.params, TrackingMode(Mode.CLOSED_LOOP, noise, seed=0))
    print(f"noise {noise:g}: open-loop max error {o.max_position_error:.2e} m, "
          f"closed-loop max error {c.max_position_error:.2e} m")
