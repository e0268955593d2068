"""Post-hoc constraint checking for MPC solutions.

Built only from the scalar LIP and barrier primitives so it can audit the
optimizer without sharing any of its code paths.
"""

from __future__ import annotations

import math

from .lip import EPS_HEADING, LipState, body_frame_offset, lip_step
from .safety import barrier_value


def constraint_report(problem, states, inputs) -> dict[str, float]:
    """Worst violation per constraint family (0 when satisfied).

    Dynamics are audited step by step (``states[k]`` against ``lip_step`` of
    ``states[k-1]``) so rounding is not amplified by the unstable pendulum.
    """
    worst = {"dynamics": 0.0, "reach_forward": 0.0, "reach_lateral": 0.0, "step_length": 0.0, "dcbf": 0.0}
    prev: LipState = problem.initial_state
    keep = 1.0 - problem.gamma
    lmin, lmax = problem.limits.l_min, problem.limits.l_max
    for k, (state, foot) in enumerate(zip(states, inputs)):
        pred = lip_step(prev, foot, problem.params)
        dyn = max(abs(pred.x - state.x), abs(pred.xdot - state.xdot), abs(pred.y - state.y), abs(pred.ydot - state.ydot))
        worst["dynamics"] = max(worst["dynamics"], dyn)
        dx, dy = state.x - prev.x, state.y - prev.y
        length = math.hypot(dx, dy)
        worst["step_length"] = max(worst["step_length"], lmin - length, length - lmax)
        bnd = problem.bounds_sequence[k]
        if length >= EPS_HEADING:
            fwd, lat = body_frame_offset(foot, dx, dy)
            worst["reach_forward"] = max(worst["reach_forward"], bnd.lb_xb - fwd, fwd - bnd.ub_xb)
            worst["reach_lateral"] = max(worst["reach_lateral"], bnd.lb_yb - lat, lat - bnd.ub_yb)
        else:
            # heading undefined: the body-frame box cannot be checked
            worst["reach_forward"] = math.inf
            worst["reach_lateral"] = math.inf
        for ob in problem.obstacles:
            h0 = barrier_value(ob, (prev.x, prev.y))
            h1 = barrier_value(ob, (state.x, state.y))
            worst["dcbf"] = max(worst["dcbf"], keep * h0 - h1)
        prev = state
    return {k: max(0.0, v) for k, v in worst.items()}


def max_violation(problem, states, inputs) -> float:
    return max(constraint_report(problem, states, inputs).values())


def satisfies_all(problem, states, inputs, tol: float) -> bool:
    return max_violation(problem, states, inputs) <= tol
