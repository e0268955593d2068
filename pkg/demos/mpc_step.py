"""Solve one DCBF-constrained MPC problem and print the footstep plan.

The walker starts at the origin heading diagonally, and a circular obstacle
sits on the straight line to the goal. Compare the barrier values along the
plan for a strict and a permissive decay rate gamma.
"""

import numpy as np

from safeplan.lip import KinematicLimits, LipState, ReachableBounds, Stance
from safeplan.safety import Obstacle, barrier_value
from safeplan.trajopt import MpcConfig, MpcProblem, solve_mpc

start = LipState(0.0, 0.3, 0.0, 0.3)
obstacle = Obstacle.circle((1.5, 1.5), 0.6)
goal = (3.0, 3.0)

for gamma in (0.2, 1.0):
    problem = MpcProblem.build(start, goal, 12, Stance.RIGHT, ReachableBounds.cassie(), KinematicLimits(),
                               (obstacle,), gamma)
    sol = solve_mpc(problem, MpcConfig(gamma=gamma, max_evaluations=20_000))
    h = np.array([barrier_value(obstacle, (s.x, s.y)) for s in sol.states])
    print(f"gamma={gamma}: feasible={sol.is_feasible}, cost={sol.terminal_cost:.4f}, min h={h.min():.3f}")
    for k, (s, u) in enumerate(zip(sol.states, sol.inputs), 1):
        print(f"  step {k:2d}: foot ({u.p_x:+.3f}, {u.p_y:+.3f})  ->  CoM ({s.x:.3f}, {s.y:.3f})  h={h[k - 1]:.3f}")
