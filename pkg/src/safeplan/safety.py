"""Barrier functions for p-norm-ball obstacles and the discrete CBF condition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Obstacle:
    """Rotated, axis-scaled p-norm ball.

    The safe set is ``barrier_value >= 0``; the zero level set is the ball of
    radii ``radius + buffer`` around ``center``. ``rotation`` is the angle of
    the obstacle's first axis in the world frame.
    """

    center: tuple[float, float]
    radii: tuple[float, float]
    buffer: tuple[float, float] = (0.0, 0.0)
    norm_p: float = 10.0
    rotation: float = 0.0

    def __post_init__(self):
        if min(self.radii) <= 0:
            raise ValueError("obstacle radii must be positive")
        if min(self.buffer) < 0:
            raise ValueError("obstacle buffer must be nonnegative")
        if self.norm_p < 1:
            raise ValueError("norm_p must be >= 1")

    @property
    def scale(self) -> np.ndarray:
        return np.array([self.radii[0] + self.buffer[0], self.radii[1] + self.buffer[1]])

    @classmethod
    def circle(cls, center, radius, buffer=0.0) -> "Obstacle":
        return cls(tuple(center), (radius, radius), (buffer, buffer), norm_p=2.0)

    @classmethod
    def ellipse(cls, center, rx, ry, rotation=0.0) -> "Obstacle":
        return cls(tuple(center), (rx, ry), (0.0, 0.0), norm_p=2.0, rotation=rotation)


@dataclass(frozen=True)
class BarrierSpec:
    obstacles: tuple[Obstacle, ...] = field(default_factory=tuple)
    gamma: float = 0.75
    activation_radius: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.activation_radius <= 0:
            raise ValueError("activation_radius must be positive")


def _local_coords(obstacle: Obstacle, positions: np.ndarray) -> np.ndarray:
    d = positions - np.asarray(obstacle.center, dtype=float)
    if obstacle.rotation:
        c, s = math.cos(obstacle.rotation), math.sin(obstacle.rotation)
        d = np.stack([c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]], axis=-1)
    return d / obstacle.scale


def _pnorm(z: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(z)
    m = a.max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return m * (((a / safe[..., None]) ** p).sum(axis=-1)) ** (1.0 / p)


def barrier_value(obstacle: Obstacle, position) -> np.ndarray | float:
    """``h = ||Sigma (r - r_obs)||_p - 1``; vectorized over leading axes."""
    pos = np.asarray(position, dtype=float)
    h = _pnorm(_local_coords(obstacle, pos), obstacle.norm_p) - 1.0
    return float(h) if h.ndim == 0 else h


def barrier_value_and_grad(obstacle: Obstacle, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Barrier values ``(n,)`` and world-frame position gradients ``(n, 2)``."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    z = _local_coords(obstacle, pos)
    p = obstacle.norm_p
    s = _pnorm(z, p)
    safe = np.where(s > 0, s, 1.0)
    gz = np.sign(z) * (np.abs(z) / safe[:, None]) ** (p - 1.0)
    gz[s == 0] = 0.0
    gl = gz / obstacle.scale
    if obstacle.rotation:
        c, sn = math.cos(obstacle.rotation), math.sin(obstacle.rotation)
        gl = np.stack([c * gl[:, 0] - sn * gl[:, 1], sn * gl[:, 0] + c * gl[:, 1]], axis=-1)
    return s - 1.0, gl


def dcbf_condition(h_k: float, h_k1: float, gamma: float) -> bool:
    return h_k1 >= (1.0 - gamma) * h_k


def activation_threshold(obstacle: Obstacle, activation_radius: float) -> float:
    return activation_radius / max(obstacle.radii)


def active_obstacles(spec: BarrierSpec, position) -> list[Obstacle]:
    """Obstacles close enough to ``position`` to be constrained, nearest (lowest h) first."""
    hits = []
    for i, ob in enumerate(spec.obstacles):
        h = barrier_value(ob, position)
        if h <= activation_threshold(ob, spec.activation_radius):
            hits.append((h, i, ob))
    hits.sort(key=lambda t: (t[0], t[1]))
    return [ob for _, _, ob in hits]


_EIGHT = np.ones((3, 3), dtype=int)


def extract_obstacles(grid, threshold: float = 0.65, buffer: float = 0.0, norm_p: float = 10.0) -> list[Obstacle]:
    """One p-norm obstacle per 8-connected component of occupied cells.

    Radii are the component half-extents, enlarged when needed so the ball
    still contains every occupied cell center (large blocks at finite p).
    """
    occ = np.asarray(grid.cells) >= threshold
    labels, count = ndimage.label(occ, structure=_EIGHT)
    if count == 0:
        return []
    res = grid.resolution
    ox, oy = grid.origin
    grow = 2.0 ** (1.0 / norm_p)
    out = []
    for sl in ndimage.find_objects(labels):
        rows, cols = sl
        x0, x1 = ox + cols.start * res, ox + cols.stop * res
        y0, y1 = oy + rows.start * res, oy + rows.stop * res
        half = np.array([(x1 - x0) / 2, (y1 - y0) / 2])
        # ball through the corner cell centers of the bounding box
        corner = grow * (half - res / 2)
        radii = np.maximum(np.maximum(half, corner), res / 2)
        out.append(
            Obstacle(
                center=((x0 + x1) / 2, (y0 + y1) / 2),
                radii=(float(radii[0]), float(radii[1])),
                buffer=(buffer, buffer),
                norm_p=norm_p,
            )
        )
    return out
