"""Track planned waypoints on the angular-momentum LIP model.

Planned velocities become momenta through ``L = m H v``. Open-loop tracking
feeds back only the simulated momentum; closed-loop tracking solves a
two-step deadbeat problem on position and momentum every step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PathTooShort
from .lip import AmState, FootPlacement, LipParams, LipState, am_step, deadbeat_placements, desired_foot_placement


class Mode(enum.Enum):
    OPEN_LOOP = "open_loop"
    CLOSED_LOOP = "closed_loop"


@dataclass(frozen=True)
class TrackingMode:
    """Tracking mode plus an optional per-step uniform disturbance.

    After every step each position coordinate receives independent noise
    from ``U(-position_noise, position_noise)`` and each momentum coordinate
    from ``U(-momentum_noise, momentum_noise)``.
    """

    mode: Mode = Mode.CLOSED_LOOP
    position_noise: float = 0.0
    momentum_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.position_noise < 0 or self.momentum_noise < 0:
            raise ValueError("noise magnitudes must be nonnegative")


@dataclass
class TrackingReport:
    mode: Mode
    states: list[AmState]
    placements: list[FootPlacement]
    position_errors: np.ndarray
    placement_errors: np.ndarray
    references: list[AmState] = field(default_factory=list)

    @property
    def max_position_error(self) -> float:
        return float(self.position_errors.max(initial=0.0))

    @property
    def max_placement_error(self) -> float:
        return float(self.placement_errors.max(initial=0.0))


def _waypoints(path: Sequence, params: LipParams) -> list[AmState]:
    out = []
    for w in path:
        state = w.state if hasattr(w, "state") else w
        if not isinstance(state, LipState):
            raise TypeError("waypoints must be LipState or carry a .state")
        out.append(AmState.from_lip(state, params))
    return out


def _planned_inputs(path: Sequence) -> list[FootPlacement | None]:
    """Foot placement applied to leave each waypoint, if the path records it."""
    inputs = [getattr(w, "first_input", None) for w in path]
    return inputs[1:] + [None]


def _disturb(state: AmState, mode: TrackingMode, rng: np.random.Generator) -> AmState:
    if mode.position_noise == 0 and mode.momentum_noise == 0:
        return state
    dp = rng.uniform(-mode.position_noise, mode.position_noise, size=2)
    dl = rng.uniform(-mode.momentum_noise, mode.momentum_noise, size=2)
    return AmState(state.x + dp[0], state.Ly + dl[0], state.y + dp[1], state.Lx + dl[1])


def _report(kind: Mode, sim: list[AmState], feet: list[FootPlacement], ref: list[AmState], planned) -> TrackingReport:
    pos_err = np.array([np.hypot(s.x - r.x, s.y - r.y) for s, r in zip(sim, ref)])
    foot_err = np.array([
        0.0 if p is None else np.hypot(f.p_x - p.p_x, f.p_y - p.p_y) for f, p in zip(feet, planned)
    ])
    return TrackingReport(kind, sim, feet, pos_err, foot_err, ref)


def track_open_loop(path: Sequence, params: LipParams, mode: TrackingMode = TrackingMode(Mode.OPEN_LOOP)) -> TrackingReport:
    """Step-by-step momentum tracking without position feedback.

    The placement for step ``k`` drives the simulated momentum to the planned
    momentum at waypoint ``k + 1``; positions are only integrated.
    """
    ref = _waypoints(path, params)
    if len(ref) < 2:
        raise PathTooShort("open-loop tracking needs at least 2 waypoints")
    rng = np.random.default_rng(mode.seed)
    sim = [ref[0]]
    feet = []
    for k in range(len(ref) - 1):
        s = sim[-1]
        foot = FootPlacement(desired_foot_placement(s.Ly, ref[k + 1].Ly, params),
                             desired_foot_placement(s.Lx, ref[k + 1].Lx, params))
        feet.append(foot)
        sim.append(_disturb(am_step(s, foot, params), mode, rng))
    return _report(Mode.OPEN_LOOP, sim, feet, ref, _planned_inputs(path)[:-1])


def track_closed_loop(path: Sequence, params: LipParams, mode: TrackingMode = TrackingMode(Mode.CLOSED_LOOP)) -> TrackingReport:
    """Receding-horizon deadbeat tracking on position and momentum.

    Each step solves for two placements that land exactly on waypoint
    ``k + 2`` and applies the first; the final step, with no waypoint two
    ahead, falls back to the one-step momentum rule.
    """
    ref = _waypoints(path, params)
    if len(ref) < 3:
        raise PathTooShort("closed-loop tracking needs at least 3 waypoints")
    rng = np.random.default_rng(mode.seed)
    sim = [ref[0]]
    feet = []
    for k in range(len(ref) - 1):
        s = sim[-1]
        if k + 2 < len(ref):
            t = ref[k + 2]
            px, _ = deadbeat_placements((s.x, s.Ly), (t.x, t.Ly), params)
            py, _ = deadbeat_placements((s.y, s.Lx), (t.y, t.Lx), params)
        else:
            px = desired_foot_placement(s.Ly, ref[k + 1].Ly, params)
            py = desired_foot_placement(s.Lx, ref[k + 1].Lx, params)
        foot = FootPlacement(px, py)
        feet.append(foot)
        sim.append(_disturb(am_step(s, foot, params), mode, rng))
    return _report(Mode.CLOSED_LOOP, sim, feet, ref, _planned_inputs(path)[:-1])
