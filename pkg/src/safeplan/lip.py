"""Linear inverted pendulum (LIP) step-to-step dynamics.

Two state parametrizations are provided: CoM position/velocity
``(x, xdot)`` and CoM position / angular momentum about the contact point
``(x, Ly)``. Both channels (sagittal and lateral) share the same matrices.
The foot placement ``p`` is the stance foot position relative to the CoM,
expressed in the world frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStep, SingularSystem

EPS_HEADING = 1e-9
DEADBEAT_COND_MAX = 1e12


class Stance(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    def flip(self) -> "Stance":
        return Stance.RIGHT if self is Stance.LEFT else Stance.LEFT


@dataclass(frozen=True)
class LipParams:
    com_height: float = 0.6
    gravity: float = 9.81
    step_duration: float = 0.4
    mass: float = 32.0
    beta: float = field(init=False)

    def __post_init__(self):
        for name in ("com_height", "gravity", "step_duration", "mass"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        object.__setattr__(self, "beta", math.sqrt(self.gravity / self.com_height))


@dataclass(frozen=True)
class LipState:
    x: float
    xdot: float
    y: float
    ydot: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.xdot, self.ydot])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.xdot, self.y, self.ydot])

    @classmethod
    def from_array(cls, a) -> "LipState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class FootPlacement:
    p_x: float
    p_y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_x, self.p_y])


@dataclass(frozen=True)
class AmState:
    """CoM position and angular momentum about the contact point.

    ``Ly`` pairs with the x channel (``Ly = m H xdot``) and ``Lx`` with the
    y channel (``Lx = m H ydot``, same sign convention on both channels).
    """

    x: float
    Ly: float
    y: float
    Lx: float

    @classmethod
    def from_lip(cls, state: LipState, params: LipParams) -> "AmState":
        mh = params.mass * params.com_height
        return cls(state.x, mh * state.xdot, state.y, mh * state.ydot)


@dataclass(frozen=True)
class ReachableBounds:
    """Foot-placement box in the body frame (forward ``xb``, leftward ``yb``)."""

    ub_xb: float
    lb_xb: float
    ub_yb: float
    lb_yb: float
    stance: Stance = Stance.RIGHT

    def __post_init__(self):
        if not self.lb_xb < self.ub_xb:
            raise ValueError("lb_xb must be < ub_xb")
        if not self.lb_yb < self.ub_yb:
            raise ValueError("lb_yb must be < ub_yb")

    def mirrored(self) -> "ReachableBounds":
        return ReachableBounds(self.ub_xb, self.lb_xb, -self.lb_yb, -self.ub_yb, self.stance.flip())

    def for_stance(self, stance: Stance) -> "ReachableBounds":
        return self if stance is self.stance else self.mirrored()

    @classmethod
    def cassie(cls, stance: Stance = Stance.RIGHT) -> "ReachableBounds":
        # right stance: lateral band [0.05, 0.25]; left stance is the mirror image
        right = cls(ub_xb=0.3, lb_xb=-0.2, ub_yb=0.25, lb_yb=0.05, stance=Stance.RIGHT)
        return right.for_stance(stance)


def alternating_bounds(bounds: ReachableBounds, first: Stance, n: int) -> list[ReachableBounds]:
    out = []
    stance = first
    for _ in range(n):
        out.append(bounds.for_stance(stance))
        stance = stance.flip()
    return out


@dataclass(frozen=True)
class KinematicLimits:
    l_min: float = 0.1
    l_max: float = 0.6

    def __post_init__(self):
        if not 0 < self.l_min < self.l_max:
            raise ValueError("need 0 < l_min < l_max")


def step_matrices(params: LipParams) -> tuple[np.ndarray, np.ndarray]:
    """Discrete per-channel LIP matrices ``A`` (2x2) and ``B`` (2,)."""
    b, T = params.beta, params.step_duration
    ch, sh = math.cosh(b * T), math.sinh(b * T)
    A = np.array([[1.0, sh / b], [0.0, ch]])
    B = np.array([1.0 - ch, -b * sh])
    return A, B


def lip_step(state: LipState, foot: FootPlacement, params: LipParams) -> LipState:
    A, B = step_matrices(params)
    sx = A @ np.array([state.x, state.xdot]) + B * foot.p_x
    sy = A @ np.array([state.y, state.ydot]) + B * foot.p_y
    return LipState(float(sx[0]), float(sx[1]), float(sy[0]), float(sy[1]))


def heading_from_delta(dx: float, dy: float, eps: float = EPS_HEADING) -> tuple[float, float]:
    """Return ``(sin(theta), cos(theta))`` for a CoM displacement.

    Uses the convention where a displacement along +y has ``theta = 0``:
    ``sin = dx / |d|`` and ``cos = dy / |d|``.
    """
    n = math.hypot(dx, dy)
    if n < eps:
        raise DegenerateStep(f"displacement norm {n!r} below {eps!r}")
    return dx / n, dy / n


def body_frame_offset(foot: FootPlacement, dx: float, dy: float) -> tuple[float, float]:
    """Foot offset expressed along (forward, left) of the heading given by ``(dx, dy)``."""
    s, c = heading_from_delta(dx, dy)
    fwd = s * foot.p_x + c * foot.p_y
    lat = -c * foot.p_x + s * foot.p_y
    return fwd, lat


def check_reachability(
    state_k: LipState,
    state_k1: LipState,
    foot: FootPlacement,
    bounds: ReachableBounds,
    limits: KinematicLimits,
) -> bool:
    dx, dy = state_k1.x - state_k.x, state_k1.y - state_k.y
    length = math.hypot(dx, dy)
    if length < limits.l_min or length > limits.l_max:
        return False
    fwd, lat = body_frame_offset(foot, dx, dy)
    return bounds.lb_xb <= fwd <= bounds.ub_xb and bounds.lb_yb <= lat <= bounds.ub_yb


def am_step_matrices(params: LipParams) -> tuple[np.ndarray, np.ndarray]:
    b, T = params.beta, params.step_duration
    mh = params.mass * params.com_height
    ch, sh = math.cosh(b * T), math.sinh(b * T)
    A_L = np.array([[1.0, sh / (mh * b)], [0.0, ch]])
    B_L = np.array([1.0 - ch, -mh * b * sh])
    return A_L, B_L


def am_step(state: AmState, foot: FootPlacement, params: LipParams) -> AmState:
    A, B = am_step_matrices(params)
    sx = A @ np.array([state.x, state.Ly]) + B * foot.p_x
    sy = A @ np.array([state.y, state.Lx]) + B * foot.p_y
    return AmState(float(sx[0]), float(sx[1]), float(sy[0]), float(sy[1]))


def desired_foot_placement(L_k: float, L_des_k1: float, params: LipParams) -> float:
    """Foot placement that drives the momentum to ``L_des_k1`` in one step."""
    b, T = params.beta, params.step_duration
    mh = params.mass * params.com_height
    return (-L_des_k1 + math.cosh(b * T) * L_k) / (mh * b * math.sinh(b * T))


def deadbeat_placements(state_k, target_k2, params: LipParams) -> tuple[float, float]:
    """Two placements ``(p_k, p_k1)`` reaching ``target_k2`` = (x, L) in two steps.

    ``state_k`` and ``target_k2`` are single-channel ``(position, momentum)`` pairs.
    """
    A, B = am_step_matrices(params)
    M = np.column_stack([A @ B, B])
    if np.linalg.cond(M) > DEADBEAT_COND_MAX:
        raise SingularSystem("deadbeat system is ill-conditioned")
    rhs = np.asarray(target_k2, dtype=float) - A @ A @ np.asarray(state_k, dtype=float)
    p = np.linalg.solve(M, rhs)
    return float(p[0]), float(p[1])
