import math

import numpy as np
import pytest

from oracles import grid_feasible_first_step, grid_search_n2
from safeplan.lip import FootPlacement, KinematicLimits, LipParams, LipState, ReachableBounds, Stance, lip_step
from safeplan.safety import BarrierSpec, Obstacle, barrier_value
from safeplan.trajopt import (
    MpcConfig,
    MpcProblem,
    _Transcription,
    compute_steps,
    dcbf_mpc_expand,
    enumerate_seeds,
    solve_mpc,
)
from safeplan.verify import constraint_report, satisfies_all

P = LipParams()
LIM = KinematicLimits()
RIGHT = ReachableBounds.cassie(Stance.RIGHT)
CFG = MpcConfig()


def _foot(u):
    return FootPlacement(float(u[0]), float(u[1]))


def _roll(s, U):
    for u in U:
        s = lip_step(s, _foot(u), P)
        yield s


def _problem(state, goal, n, obstacles=(), gamma=0.75, stance=Stance.RIGHT):
    return MpcProblem.build(state, goal, n, stance, RIGHT, LIM, obstacles, gamma, P)


def test_compute_steps_examples():
    assert compute_steps((0, 0), (0.5, 0), CFG) == 2
    assert compute_steps((0, 0), (10, 0), CFG) == 3
    assert compute_steps((1, 1), (1, 1), CFG) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        MpcConfig(n_min=3, n_max=2)
    with pytest.raises(ValueError):
        MpcConfig(gamma=1.5)
    with pytest.raises(ValueError):
        _problem(LipState(0, 0, 0, 0.3), (1, 1), 0)


def test_transcription_round_trip():
    rng = np.random.default_rng(0)
    s = LipState(0.2, 0.3, -0.1, 0.4)
    tr = _Transcription(_problem(s, (2, 2), 4))
    U = rng.uniform(-0.3, 0.3, (4, 2))
    pos, vel, U2 = tr.unpack(tr.pack_inputs(U))
    np.testing.assert_allclose(U2, U, atol=1e-10)
    cur = s
    for k in range(4):
        cur = lip_step(cur, _foot(U[k]), P)
        np.testing.assert_allclose(pos[k + 1], [cur.x, cur.y], atol=1e-10)
        np.testing.assert_allclose(vel[k + 1], [cur.xdot, cur.ydot], atol=1e-10)


def test_constraint_jacobian_finite_difference():
    rng = np.random.default_rng(1)
    obs = (Obstacle.circle((1.0, 1.5), 0.5), Obstacle((2.0, 0.5), (0.4, 0.8), norm_p=4.0, rotation=0.3))
    tr = _Transcription(_problem(LipState(0, 0.2, 0, 0.4), (2, 2), 3, obs))
    z = tr.pack_inputs(rng.uniform(-0.2, 0.2, (3, 2)))
    c, J = tr.constraints(z)
    eps = 1e-6
    fd = np.empty_like(J)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = eps
        fd[:, i] = (tr.constraints(z + e, jac=False) - tr.constraints(z - e, jac=False)) / (2 * eps)
    np.testing.assert_allclose(J, fd, atol=1e-5 * (1 + np.abs(fd).max()))
    f, g = tr.cost(z, 1.0, 10.0)
    gfd = [(tr.cost(z + eps * e, 1, 10)[0] - tr.cost(z - eps * e, 1, 10)[0]) / (2 * eps) for e in np.eye(z.size)]
    np.testing.assert_allclose(g, gfd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_n2_not_worse_than_grid(seed):
    rng = np.random.default_rng(seed)
    sp, th = rng.uniform(0.2, 0.6), rng.uniform(0, 2 * math.pi)
    s = LipState(0, sp * math.sin(th), 0, sp * math.cos(th))
    goal = (0.5 * math.sin(th), 0.5 * math.cos(th))
    pr = _problem(s, goal, 2)
    sol = solve_mpc(pr, CFG)
    best, _ = grid_search_n2(s, goal, pr.bounds_sequence, LIM, P, CFG.w1, CFG.w2, span=0.6)
    assert sol.is_feasible
    assert satisfies_all(pr, sol.states, sol.inputs, CFG.feasibility_tol)
    assert sol.terminal_cost <= 1.01 * best


def test_goal_at_start_moving():
    s = LipState(0, 0.3, 0, 0)
    sol = solve_mpc(_problem(s, (0, 0), 2), CFG)
    assert sol.is_feasible
    assert sol.terminal_cost < CFG.w2 * LIM.l_max ** 2


def test_standing_start_is_infeasible():
    # zero speed forces p parallel to the step, so the lateral band is empty
    pr = _problem(LipState(0, 0, 0, 0), (0, 0), 2)
    sol = solve_mpc(pr, CFG)
    assert not sol.is_feasible
    assert constraint_report(pr, sol.states, sol.inputs)["reach_lateral"] > 1e-3
    assert len(grid_feasible_first_step(pr.initial_state, RIGHT, LIM, P)) == 0


def test_seeds_are_feasible_start_points():
    pr = _problem(LipState(0, 0.2, 0, 0.4), (1.0, 1.2), 3, (Obstacle.circle((0.6, 0.7), 0.25),))
    seeds = enumerate_seeds(pr, CFG)
    assert 1 <= len(seeds) <= CFG.seed_starts
    tr = _Transcription(pr)
    for z in seeds:
        _, _, U = tr.unpack(z)
        assert satisfies_all(pr, list(_roll(pr.initial_state, U)), [_foot(u) for u in U], 1e-9)


def test_obstacle_solution_respects_dcbf():
    ob = Obstacle.circle((0.3, 1.0), 0.3)
    pr = _problem(LipState(0, 0.1, 0, 0.45), (0.5, 2.0), 4, (ob,), gamma=0.3)
    sol = solve_mpc(pr, CFG)
    assert sol.is_feasible
    rep = constraint_report(pr, sol.states, sol.inputs)
    assert max(rep.values()) <= CFG.feasibility_tol
    h = [barrier_value(ob, (0, 0))] + [barrier_value(ob, (s.x, s.y)) for s in sol.states]
    assert all(h1 >= 0.7 * h0 - 1e-6 for h0, h1 in zip(h, h[1:]))


def test_deterministic():
    ob = Obstacle.circle((0.3, 1.0), 0.3)
    pr = _problem(LipState(0, 0.1, 0, 0.45), (0.5, 2.0), 3, (ob,))
    a, b = solve_mpc(pr, CFG), solve_mpc(pr, CFG)
    assert a.inputs == b.inputs and a.terminal_cost == b.terminal_cost


def test_trace_callback():
    log = []
    solve_mpc(_problem(LipState(0, 0.2, 0, 0.3), (0.4, 0.6), 2), CFG, trace=log.append)
    assert log and {"cost", "max_violation", "mu"} <= set(log[0])


def test_expand_toward_own_position():
    s = LipState(0, 0, 0, 0.4)
    e = dcbf_mpc_expand(s, Stance.RIGHT, (0, 0), BarrierSpec(()), CFG, RIGHT, LIM, P)
    assert e.is_feasible
    assert math.hypot(e.state.x, e.state.y) <= LIM.l_max + 1e-6
    assert e.stance is Stance.LEFT
    assert e.state == lip_step(s, e.first_input, P)


def test_expand_around_obstacle():
    s = LipState(0, 0, 0, 0.4)
    ob = Obstacle.circle((0, 1.0), 0.5)
    spec = BarrierSpec((ob,), gamma=0.75)
    e = dcbf_mpc_expand(s, Stance.RIGHT, (0, 2.0), spec, CFG, RIGHT, LIM, P)
    assert e.is_feasible
    assert e.obstacles == (ob,)
    h0, h1 = barrier_value(ob, (0, 0)), barrier_value(ob, (e.state.x, e.state.y))
    assert h1 >= 0.25 * h0 - 1e-6


def test_expand_with_empty_box():
    # at 3 m/s every admissible step is longer than l_max
    s = LipState(0, 0, 0, 3.0)
    e = dcbf_mpc_expand(s, Stance.RIGHT, (0, -0.5), BarrierSpec(()), CFG, RIGHT, LIM, P, horizon=1)
    assert not e.is_feasible
    assert e.solution.max_violation > CFG.feasibility_tol
    assert len(grid_feasible_first_step(s, RIGHT, LIM, P)) == 0
