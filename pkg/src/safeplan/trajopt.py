"""Safety-critical multi-step planner (DCBF-constrained MPC on the LIP model).

Decision variables are the foot placements only; states are eliminated by
rolling out the linear dynamics. The nonlinear program is solved with an
augmented-Lagrangian outer loop (PHR multipliers for inequalities) around a
dense BFGS inner loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteIterate
from .lip import (
    EPS_HEADING,
    FootPlacement,
    KinematicLimits,
    LipParams,
    LipState,
    ReachableBounds,
    Stance,
    alternating_bounds,
    lip_step,
    step_matrices,
)
from .safety import BarrierSpec, Obstacle, active_obstacles, barrier_value, barrier_value_and_grad


@dataclass(frozen=True)
class MpcConfig:
    n_min: int = 2
    n_max: int = 3
    w1: float = 1.0
    w2: float = 10.0
    gamma: float = 0.75
    feasibility_tol: float = 1e-6
    max_iterations: int = 200
    max_evaluations: int = 5000
    l_nominal: float = 0.3
    seed_horizon: int = 4
    seed_directions: int = 12
    seed_lengths: int = 3
    seed_beam: int = 400
    seed_starts: int = 4
    screen_evaluations: int = 400

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("cost weights must be nonnegative")
        if self.feasibility_tol <= 0:
            raise ValueError("feasibility_tol must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.l_nominal <= 0:
            raise ValueError("l_nominal must be positive")
        if self.seed_directions < 1 or self.seed_lengths < 1 or self.seed_beam < 1 or self.seed_starts < 1:
            raise ValueError("seed enumeration sizes must be >= 1")
        if self.screen_evaluations < 1:
            raise ValueError("screen_evaluations must be >= 1")


@dataclass(frozen=True)
class MpcProblem:
    initial_state: LipState
    goal: tuple[float, float]
    horizon: int
    bounds_sequence: tuple[ReachableBounds, ...]
    limits: KinematicLimits
    obstacles: tuple[Obstacle, ...] = ()
    gamma: float = 0.75
    params: LipParams = field(default_factory=LipParams)

    def __post_init__(self):
        object.__setattr__(self, "bounds_sequence", tuple(self.bounds_sequence))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.bounds_sequence) != self.horizon:
            raise ValueError("bounds_sequence must have one entry per step")
        for a, b in zip(self.bounds_sequence, self.bounds_sequence[1:]):
            if a.stance is b.stance:
                raise ValueError("stance must alternate along the horizon")

    @classmethod
    def build(cls, initial_state, goal, horizon, first_stance: Stance, bounds: ReachableBounds,
              limits, obstacles=(), gamma=0.75, params=None) -> "MpcProblem":
        return cls(
            initial_state=initial_state,
            goal=(float(goal[0]), float(goal[1])),
            horizon=horizon,
            bounds_sequence=tuple(alternating_bounds(bounds, first_stance, horizon)),
            limits=limits,
            obstacles=tuple(obstacles),
            gamma=gamma,
            params=params or LipParams(),
        )


@dataclass
class MpcSolution:
    states: list[LipState]
    inputs: list[FootPlacement]
    is_feasible: bool
    terminal_cost: float
    max_violation: float
    iterations: int = 0
    evaluations: int = 0
    status: str = ""

    @property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.states])


class _Transcription:
    """Problem in terms of the step-end CoM positions ``Q = (r_1..r_N)``.

    Foot placements and velocities are affine in ``Q`` (per channel):
    ``p_k = (q_{k+1} - q_k - a v_k) / b`` and ``v_{k+1} = -v_k + (d/b) dq_k``.
    This is an exact reparametrization of the input sequence whose
    coefficients stay bounded, unlike the input-to-position map of the
    unstable pendulum which grows like ``cosh(beta T)^N``.
    """

    def __init__(self, problem: MpcProblem):
        self.problem = problem
        N = self.N = problem.horizon
        A, B = step_matrices(problem.params)
        a, ch, b, d = A[0, 1], A[1, 1], B[0], B[1]
        s0 = problem.initial_state
        q0 = np.array([s0.x, s0.y])
        Vq = np.zeros((N + 1, N))
        v_off = np.zeros((N + 1, 2))
        v_off[0] = [s0.xdot, s0.ydot]
        Pq = np.zeros((N, N))
        p_off = np.zeros((N, 2))
        for k in range(N):
            Pq[k] = -a * Vq[k] / b
            Pq[k, k] += 1.0 / b
            if k > 0:
                Pq[k, k - 1] -= 1.0 / b
            p_off[k] = (-a * v_off[k] - (q0 if k == 0 else 0.0)) / b
            Vq[k + 1] = ch * Vq[k] + d * Pq[k]
            v_off[k + 1] = ch * v_off[k] + d * p_off[k]
        self.Pq, self.p_off, self.Vq, self.v_off = Pq, p_off, Vq, v_off
        self.q0 = q0
        D = np.eye(N)
        D[1:, :-1] -= np.eye(N - 1)
        self.D = D
        self.E_next = np.eye(N)  # d r_{k+1} / dQ
        self.E_prev = np.eye(N, k=-1)  # d r_k / dQ (r_0 fixed)
        bs = problem.bounds_sequence
        self.lb_x = np.array([x.lb_xb for x in bs])
        self.ub_x = np.array([x.ub_xb for x in bs])
        self.lb_y = np.array([x.lb_yb for x in bs])
        self.ub_y = np.array([x.ub_yb for x in bs])
        self.lmin = problem.limits.l_min
        self.lmax = problem.limits.l_max
        self.goal = np.asarray(problem.goal, dtype=float)
        self.keep = 1.0 - problem.gamma
        self.n_obs = len(problem.obstacles)
        self.m = N * (6 + self.n_obs)

    def unpack(self, z: np.ndarray):
        Q = z.reshape(self.N, 2)
        pos = np.vstack([self.q0, Q])
        U = self.Pq @ Q + self.p_off
        vel = self.Vq @ Q + self.v_off
        return pos, vel, U

    def pack_inputs(self, U: np.ndarray) -> np.ndarray:
        """Positions reached by rolling out the placements ``U`` (for guesses)."""
        A, B = step_matrices(self.problem.params)
        s = self.problem.initial_state
        sx, sy = np.array([s.x, s.xdot]), np.array([s.y, s.ydot])
        out = []
        for px, py in np.asarray(U, float).reshape(self.N, 2):
            sx = A @ sx + B * px
            sy = A @ sy + B * py
            out.append((sx[0], sy[0]))
        return np.array(out).ravel()

    def cost(self, z: np.ndarray, w1: float, w2: float) -> tuple[float, np.ndarray]:
        Q = z.reshape(self.N, 2)
        v = self.Vq[-1] @ Q + self.v_off[-1]
        e = Q[-1] - self.goal
        f = w1 * (v @ v) + w2 * (e @ e)
        gQ = 2 * w1 * np.outer(self.Vq[-1], v)
        gQ[-1] += 2 * w2 * e
        return float(f), gQ.ravel()

    def constraints(self, z: np.ndarray, jac: bool = True):
        N = self.N
        pos, _, U = self.unpack(z)
        px, py = U[:, 0], U[:, 1]
        d = pos[1:] - pos[:-1]
        dx, dy = d[:, 0], d[:, 1]
        len2 = dx * dx + dy * dy
        n = np.sqrt(len2 + EPS_HEADING ** 2)
        fwd = (px * dx + py * dy) / n
        lat = (-dy * px + dx * py) / n
        blocks = [fwd - self.lb_x, self.ub_x - fwd, lat - self.lb_y, self.ub_y - lat,
                  n - self.lmin, self.lmax - n]
        hs = []
        for ob in self.problem.obstacles:
            h, gh = barrier_value_and_grad(ob, pos)
            hs.append(gh)
            blocks.append(h[1:] - self.keep * h[:-1])
        c = np.concatenate(blocks)
        if not jac:
            return c
        J = np.empty((len(blocks), N, N, 2))
        P, D = self.Pq, self.D
        n2 = n * n
        # forward component: depends on p_k and on the displacement
        J[0, :, :, 0] = (dx / n)[:, None] * P + (px / n - fwd * dx / n2)[:, None] * D
        J[0, :, :, 1] = (dy / n)[:, None] * P + (py / n - fwd * dy / n2)[:, None] * D
        J[1] = -J[0]
        J[2, :, :, 0] = (-dy / n)[:, None] * P + (py / n - lat * dx / n2)[:, None] * D
        J[2, :, :, 1] = (dx / n)[:, None] * P + (-px / n - lat * dy / n2)[:, None] * D
        J[3] = -J[2]
        J[4, :, :, 0] = (dx / n)[:, None] * D
        J[4, :, :, 1] = (dy / n)[:, None] * D
        J[5] = -J[4]
        for i, gh in enumerate(hs):
            for ch in range(2):
                J[6 + i, :, :, ch] = gh[1:, ch, None] * self.E_next - self.keep * gh[:-1, ch, None] * self.E_prev
        return c, J.reshape(len(blocks) * N, 2 * N)


def initial_guess(problem: MpcProblem, l_nominal: float, via: Sequence | None = None) -> np.ndarray:
    """Step-end positions spaced ``l_nominal`` apart along ``start -> via... -> goal``.

    Once the polyline is exhausted the remaining steps keep stepping
    ``l_nominal`` past the goal in the final direction and back, so no step
    has zero length.
    """
    s = problem.initial_state
    p0 = np.array([s.x, s.y])
    pts = [p0] + [np.asarray(v, float) for v in (via or ())] + [np.asarray(problem.goal, float)]
    seg = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
    seg_len = [float(np.hypot(*d)) for d in seg]
    total = sum(seg_len)
    if seg_len[-1] > 1e-9:
        last_dir = seg[-1] / seg_len[-1]
    else:
        v = np.array([s.xdot, s.ydot])
        speed = float(np.hypot(*v))
        last_dir = v / speed if speed > 1e-9 else np.array([0.0, 1.0])

    def point_at(t):
        for start, d, L in zip(pts, seg, seg_len):
            if t <= L and L > 0:
                return start + d * (t / L)
            t -= L
        return pts[-1]

    Q = np.zeros((problem.horizon, 2))
    for k in range(problem.horizon):
        t = (k + 1) * l_nominal
        if t <= total:
            Q[k] = point_at(t)
        else:
            # shuffle back and forth across the goal
            over = (k + 1 - math.floor(total / l_nominal)) % 2
            Q[k] = pts[-1] + (0.5 * l_nominal if over else -0.5 * l_nominal) * last_dir
    return Q.ravel()


def enumerate_seeds(problem: MpcProblem, config: MpcConfig) -> list[np.ndarray]:
    """Feasible step sequences found by a beam search, best terminal cost first.

    Given the velocity at the start of a step, the displacement direction
    fixes the foot's lateral offset (through the velocity's lateral
    component) and its length fixes the forward offset, so each step's
    feasible set is a union of two direction arcs times a length interval.
    Directions and lengths are sampled at interior points of these sets;
    barrier conditions are checked exactly. Returns flattened step-end
    positions, one per pattern of arcs, at most ``config.seed_starts``.
    """
    A, B = step_matrices(problem.params)
    a, ch, b, d = A[0, 1], A[1, 1], B[0], B[1]
    s0 = problem.initial_state
    pos = np.array([[s0.x, s0.y]])
    vel = np.array([[s0.xdot, s0.ydot]])
    hist = np.zeros((1, 0, 2))
    sig = np.zeros(1, dtype=np.int64)
    keep = 1.0 - problem.gamma
    lim = problem.limits
    fr_dir = (np.arange(config.seed_directions) + 0.5) / config.seed_directions
    fr_len = (np.arange(config.seed_lengths) + 0.5) / config.seed_lengths
    goal = np.asarray(problem.goal, dtype=float)
    for bnd in problem.bounds_sequence:
        speed = np.hypot(vel[:, 0], vel[:, 1])
        phi = np.arctan2(vel[:, 1], vel[:, 0])
        safe = np.where(speed > 1e-12, speed, 1.0)
        s1 = bnd.lb_yb * (-b) / a / safe
        s2 = bnd.ub_yb * (-b) / a / safe
        ok = (s1 <= 1.0) & (s2 >= -1.0) & (speed > 1e-12)
        a1 = np.arcsin(np.clip(s1, -1.0, 1.0))
        a2 = np.arcsin(np.clip(s2, -1.0, 1.0))
        # psi = phi - theta; arcs [a1, a2] and [pi - a2, pi - a1]
        psi = np.concatenate([a1[:, None] + (a2 - a1)[:, None] * fr_dir,
                              np.pi - a2[:, None] + (a2 - a1)[:, None] * fr_dir], axis=1)
        theta = phi[:, None] - psi
        v_f = speed[:, None] * np.cos(psi)
        lo = np.maximum(lim.l_min, a * v_f + b * bnd.ub_xb)
        hi = np.minimum(lim.l_max, a * v_f + b * bnd.lb_xb)
        L = lo[..., None] + (hi - lo)[..., None] * fr_len
        valid = (ok[:, None] & (hi > lo))[..., None] & np.ones_like(L, dtype=bool)
        parent = np.broadcast_to(np.arange(len(pos))[:, None, None], L.shape)[valid]
        arc = np.broadcast_to((np.arange(psi.shape[1]) >= config.seed_directions)[None, :, None], L.shape)[valid]
        th = np.broadcast_to(theta[..., None], L.shape)[valid]
        ln = L[valid]
        if len(ln) == 0:
            return []
        delta = ln[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
        v_par = vel[parent]
        foot = (delta - a * v_par) / b
        new_vel = ch * v_par + d * foot
        old_pos = pos[parent]
        new_pos = old_pos + delta
        good = np.ones(len(ln), dtype=bool)
        for ob in problem.obstacles:
            good &= barrier_value(ob, new_pos) >= keep * barrier_value(ob, old_pos) + 1e-9
        if not good.any():
            return []
        hist = np.concatenate([hist[parent[good]], new_pos[good][:, None]], axis=1)
        sig = 2 * sig[parent[good]] + arc[good]
        pos, vel = new_pos[good], new_vel[good]
        if len(pos) > config.seed_beam:
            # half closest to the goal, half spread evenly over the rest
            order = np.argsort(np.hypot(*(pos - goal).T), kind="stable")
            half = config.seed_beam // 2
            rest = order[half:]
            pick = np.concatenate([order[:half], rest[np.linspace(0, len(rest) - 1, config.seed_beam - half).astype(int)]])
            hist, pos, vel, sig = hist[pick], pos[pick], vel[pick], sig[pick]
    cost = config.w1 * np.sum((pos - goal) ** 2, axis=1) + config.w2 * np.sum(vel ** 2, axis=1)
    # local optima follow the arc chosen at each step: keep the best per arc pattern
    out: list[np.ndarray] = []
    seen: set[int] = set()
    for i in np.argsort(cost, kind="stable"):
        if int(sig[i]) not in seen:
            seen.add(int(sig[i]))
            out.append(hist[i].ravel())
        if len(out) == config.seed_starts:
            break
    return out


def detour_points(problem: MpcProblem) -> list[np.ndarray]:
    """Via points passing either side of the obstacle blocking the straight segment."""
    s = problem.initial_state
    p0 = np.array([s.x, s.y])
    goal = np.asarray(problem.goal, float)
    d = goal - p0
    L = float(np.hypot(*d))
    if L < 1e-9 or not problem.obstacles:
        return []
    u = d / L
    normal = np.array([-u[1], u[0]])
    blocking = []
    for ob in problem.obstacles:
        c = np.asarray(ob.center, float)
        t = float(np.clip((c - p0) @ u, 0.0, L))
        if np.hypot(*(p0 + t * u - c)) <= max(ob.scale):
            blocking.append((t, ob))
    if not blocking:
        return []
    _, ob = min(blocking, key=lambda x: x[0])
    c = np.asarray(ob.center, float)
    reach = 1.5 * max(ob.scale)
    return [c + reach * normal, c - reach * normal]


def _bfgs(fun, z0, H, gtol, max_iter, budget):
    """BFGS with Armijo backtracking on ``fun -> (f, grad)``.

    ``H`` is the inverse-Hessian estimate (None to start from a scaled
    identity); it is returned so callers can warm start the next solve.
    Returns ``(z, f, g, H, iterations, evaluations, converged)``.
    """
    z = z0.copy()
    f, g = fun(z)
    evals = 1
    n = z.size
    flat = 0
    for it in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            return z, f, g, H, it, evals, True
        if H is None:
            d = -g / max(1.0, float(np.linalg.norm(g)))
        else:
            d = -H @ g
        slope = g @ d
        if slope >= 0:
            H = None
            d = -g / max(1.0, float(np.linalg.norm(g)))
            slope = g @ d
        t = 1.0
        while True:
            zn = z + t * d
            fn, gn = fun(zn)
            evals += 1
            if not math.isfinite(fn):
                raise NonFiniteIterate("objective became non-finite")
            if fn <= f + 1e-4 * t * slope:
                break
            t *= 0.3
            if t < 1e-14 or evals >= budget:
                return z, f, g, H, it, evals, False
        s = zn - z
        y = gn - g
        sy = s @ y
        if sy > 1e-16 * max(1.0, s @ s):
            if H is None:
                H = np.eye(n) * (sy / (y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H + ((sy + y @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        # progress below round-off for several iterations counts as converged
        flat = flat + 1 if f - fn <= 1e-13 * (1.0 + abs(f)) else 0
        z, f, g = zn, fn, gn
        if flat >= 3:
            return z, f, g, H, it + 1, evals, True
        if evals >= budget:
            return z, f, g, H, it + 1, evals, False
    return z, f, g, H, max_iter, evals, bool(np.max(np.abs(g)) <= gtol)


def solve_mpc(
    problem: MpcProblem,
    config: MpcConfig,
    guess: np.ndarray | None = None,
    trace: Callable[[dict], None] | None = None,
) -> MpcSolution:
    """Locally solve the DCBF-constrained terminal-cost MPC problem.

    ``guess`` gives step-end CoM positions, shape ``(N, 2)`` (for instance
    ``solution.positions`` of a related problem). Positions rather than
    placements are taken because rolling placements through the unstable
    pendulum amplifies rounding like ``cosh(beta T)^N``. Without a guess,
    short horizons start from every enumerated seed and long ones from a
    straight-line walk to the goal, then from detours around any blocking
    obstacle; the best answer is kept.

    Never raises on infeasible geometry: the returned solution carries
    ``is_feasible=False`` and the residual ``max_violation`` instead.
    """
    tr = _Transcription(problem)
    if guess is not None:
        z = np.asarray(guess, dtype=float).reshape(-1)
        if z.size != 2 * problem.horizon:
            raise ValueError("guess must hold one position per step")
        return _solve_from(tr, z.copy(), config, trace)
    if problem.horizon <= config.seed_horizon:
        seeds = enumerate_seeds(problem, config)
        if not seeds:
            # nothing feasible on the enumeration lattice: a short solve only
            short = replace(config, max_evaluations=config.screen_evaluations)
            sol = _solve_from(tr, initial_guess(problem, config.l_nominal), short, trace)
            return sol
        best = None
        for z in seeds:
            cand = _solve_from(tr, z, config, trace)
            if best is not None:
                cand.evaluations += best.evaluations
            if best is None or _better(cand, best):
                best = cand
            else:
                best.evaluations = cand.evaluations
        return best
    sol = _solve_from(tr, initial_guess(problem, config.l_nominal), config, trace)
    if sol.is_feasible:
        return sol
    best = sol
    for via in detour_points(problem):
        cand = _solve_from(tr, initial_guess(problem, config.l_nominal, [via]), config, trace)
        cand.evaluations += best.evaluations
        if (cand.is_feasible and (not best.is_feasible or cand.terminal_cost < best.terminal_cost)) or (
            not best.is_feasible and not cand.is_feasible and cand.max_violation < best.max_violation
        ):
            best = cand
        else:
            best.evaluations = cand.evaluations
    return best


def _better(cand: MpcSolution, best: MpcSolution) -> bool:
    if cand.is_feasible != best.is_feasible:
        return cand.is_feasible
    if cand.is_feasible:
        return cand.terminal_cost < best.terminal_cost
    return cand.max_violation < best.max_violation


def _solve_from(tr: _Transcription, z: np.ndarray, config: MpcConfig, trace) -> MpcSolution:
    problem = tr.problem
    if not np.all(np.isfinite(z)):
        raise NonFiniteIterate("initial guess is not finite")
    tol = config.feasibility_tol
    w1, w2 = config.w1, config.w2
    f0, _ = tr.cost(z, w1, w2)
    fscale = 1.0 / max(1.0, f0)
    lam = np.zeros(tr.m)
    mu = 10.0
    evals = 0
    iters = 0
    best = None
    c0 = tr.constraints(z, jac=False)
    viol0 = float(max(0.0, -c0.min())) if c0.size else 0.0
    if viol0 <= tol:
        # a feasible start is itself a candidate answer
        best = (z.copy(), viol0, f0)
    prev_viol = math.inf
    prev_cost = math.inf
    stalled = 0
    H = None
    status = "iteration_limit"

    for outer in range(config.max_iterations):
        def aug(zz, lam=lam, mu=mu):
            f, gf = tr.cost(zz, w1, w2)
            c, J = tr.constraints(zz)
            shifted = c - lam / mu
            act = shifted < 0
            val = f * fscale + np.sum(np.where(act, -lam * c + 0.5 * mu * c * c, -0.5 * lam * lam / mu))
            coef = np.where(act, -lam + mu * c, 0.0)
            return val, gf * fscale + J.T @ coef

        gtol = max(1e-9, min(1e-4, 1e-3 / mu))
        z, _, _, H, it, ev, inner_ok = _bfgs(aug, z, H, gtol, 300, config.max_evaluations - evals)
        iters += it
        evals += ev
        if not np.all(np.isfinite(z)):
            raise NonFiniteIterate("non-finite foot placements")
        c = tr.constraints(z, jac=False)
        viol = float(max(0.0, -c.min())) if c.size else 0.0
        cost, _ = tr.cost(z, w1, w2)
        if trace is not None:
            trace({"outer": outer, "cost": cost, "max_violation": viol, "mu": mu, "evaluations": evals, "inner_converged": inner_ok})
        if best is None or (viol <= tol and (best[1] > tol or cost < best[2])) or (best[1] > tol and viol < best[1]):
            best = (z.copy(), viol, cost)
        if viol <= tol and (inner_ok or abs(cost - prev_cost) <= 1e-9 * (1.0 + abs(cost))):
            status = "converged"
            break
        prev_cost = cost
        lam = np.maximum(0.0, lam - mu * c)
        if viol > 0.25 * prev_viol and mu < 1e10:
            mu *= 10.0
            if H is not None:
                H = H / 10.0
            stalled = stalled + 1 if viol > 0.9 * prev_viol else 0
        else:
            stalled = 0
        prev_viol = min(prev_viol, viol)
        if evals >= config.max_evaluations:
            status = "evaluation_limit"
            break
        if mu >= 1e10 and stalled >= 3 and viol > tol:
            status = "infeasible"
            break

    z, viol, cost = best
    return _package(tr, z, viol <= tol, cost, viol, iters, evals, status)


def _package(tr: _Transcription, z, feasible, cost, viol, iters, evals, status) -> MpcSolution:
    pos, vel, U = tr.unpack(z)
    states = [LipState(float(pos[k, 0]), float(vel[k, 0]), float(pos[k, 1]), float(vel[k, 1]))
              for k in range(1, tr.N + 1)]
    inputs = [FootPlacement(float(px), float(py)) for px, py in U]
    return MpcSolution(states, inputs, bool(feasible), float(cost), float(viol), iters, evals, status)


def compute_steps(start: Sequence[float], target: Sequence[float], config: MpcConfig) -> int:
    dist = math.hypot(target[0] - start[0], target[1] - start[1])
    n = math.ceil(dist / config.l_nominal)
    return int(min(max(n, config.n_min), config.n_max))


@dataclass
class Expansion:
    state: LipState
    first_input: FootPlacement | None
    stance: Stance
    is_feasible: bool
    solution: MpcSolution | None
    obstacles: tuple[Obstacle, ...] = ()


def dcbf_mpc_expand(
    nearest: LipState,
    stance: Stance,
    target: Sequence[float],
    barriers: BarrierSpec,
    config: MpcConfig,
    bounds: ReachableBounds,
    limits: KinematicLimits,
    params: LipParams,
    horizon: int | None = None,
) -> Expansion:
    """Receding-horizon node expansion: solve toward ``target`` and keep step one."""
    start = (nearest.x, nearest.y)
    n = compute_steps(start, target, config) if horizon is None else horizon
    active = tuple(active_obstacles(barriers, start))
    problem = MpcProblem.build(nearest, target, n, stance, bounds, limits, active, barriers.gamma, params)
    sol = solve_mpc(problem, config)
    # re-roll the applied step so tree edges are exact LIP transitions
    return Expansion(
        state=lip_step(nearest, sol.inputs[0], params),
        first_input=sol.inputs[0],
        stance=stance.flip(),
        is_feasible=sol.is_feasible,
        solution=sol,
        obstacles=active,
    )
