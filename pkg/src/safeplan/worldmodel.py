"""Occupancy grid, signal field, beam sensor and the path information measure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, ParseError, PoseOutOfMap

OCCUPIED = 0.65
FREE = 0.35


@dataclass(frozen=True)
class OccupancyGrid:
    """Occupancy probabilities indexed ``cells[row, col]``; row 0 is the minimum y."""

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        if cells.ndim != 2:
            raise DimensionMismatch("cells must be a 2-D array")
        if np.any(~np.isfinite(cells)) or cells.min(initial=0.0) < 0 or cells.max(initial=0.0) > 1:
            raise ValueError("occupancy probabilities must lie in [0, 1]")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, ox + self.width * self.resolution, oy, oy + self.height * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) containing a world point; may be out of range."""
        return (int(math.floor((y - self.origin[1]) / self.resolution)),
                int(math.floor((x - self.origin[0]) / self.resolution)))

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def contains(self, x: float, y: float) -> bool:
        return self.in_bounds(*self.cell_of(x, y))

    def cell_center(self, row, col):
        r = self.resolution
        return self.origin[0] + (np.asarray(col) + 0.5) * r, self.origin[1] + (np.asarray(row) + 0.5) * r

    def centers(self) -> np.ndarray:
        """World coordinates of all cell centers, shape ``(height, width, 2)``."""
        rows, cols = np.mgrid[0:self.height, 0:self.width]
        cx, cy = self.cell_center(rows, cols)
        return np.stack([cx, cy], axis=-1)

    @classmethod
    def filled(cls, width: int, height: int, resolution: float, value: float = 0.0, origin=(0.0, 0.0)):
        return cls(np.full((height, width), float(value)), resolution, origin)


@dataclass(frozen=True)
class SignalSource:
    center: tuple[float, float]
    strength: float
    covariance: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("signal strength must be nonnegative")
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError("covariance must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance must be positive definite")


def signal_strength(sources: Sequence[SignalSource], position) -> np.ndarray | float:
    """Sum of exponentially decaying sources (Mahalanobis distance); vectorized."""
    pos = np.asarray(position, dtype=float)
    total = np.zeros(pos.shape[:-1])
    for src in sources:
        d = pos - np.asarray(src.center, dtype=float)
        prec = np.linalg.inv(np.asarray(src.covariance, dtype=float))
        m2 = np.einsum("...i,ij,...j->...", d, prec, d)
        total = total + src.strength * np.exp(-np.sqrt(np.maximum(m2, 0.0)))
    return float(total) if total.ndim == 0 else total


@dataclass(frozen=True)
class SensorModel:
    num_beams: int = 36
    fov: float = 2 * math.pi
    max_range: float = 5.0

    def __post_init__(self):
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")

    def angles(self, heading: float) -> np.ndarray:
        if self.num_beams == 1:
            return np.array([heading])
        if self.fov >= 2 * math.pi - 1e-12:
            return heading + np.arange(self.num_beams) * (2 * math.pi / self.num_beams)
        return heading + np.linspace(-self.fov / 2, self.fov / 2, self.num_beams)


def trace_ray(grid: OccupancyGrid, x: float, y: float, angle: float, max_range: float,
              occupied: float = OCCUPIED) -> list[tuple[int, int]]:
    """Cells crossed by one beam, excluding the sensor's own cell.

    Grid traversal (Amanatides-Woo). A cell is included when the beam enters
    it before ``max_range``; the trace stops after the first occupied cell or
    at the map border.
    """
    res = grid.resolution
    gx, gy = (x - grid.origin[0]) / res, (y - grid.origin[1]) / res
    col, row = int(math.floor(gx)), int(math.floor(gy))
    dx, dy = math.cos(angle), math.sin(angle)
    if abs(dx) < 1e-15:
        dx = 0.0
    if abs(dy) < 1e-15:
        dy = 0.0
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    inf = math.inf
    t_c = ((col + (dx > 0)) - gx) / dx * res if dx else inf
    t_r = ((row + (dy > 0)) - gy) / dy * res if dy else inf
    dt_c = res / abs(dx) if dx else inf
    dt_r = res / abs(dy) if dy else inf
    out = []
    while True:
        if t_c < t_r:
            t, col, t_c = t_c, col + step_c, t_c + dt_c
        else:
            t, row, t_r = t_r, row + step_r, t_r + dt_r
        if t >= max_range or not grid.in_bounds(row, col):
            break
        out.append((row, col))
        if grid.cells[row, col] >= occupied:
            break
    return out


def cast_beams(grid: OccupancyGrid, pose: Sequence[float], sensor: SensorModel,
               occupied: float = OCCUPIED) -> list[list[tuple[int, int]]]:
    x, y, heading = pose
    if not grid.contains(x, y):
        raise PoseOutOfMap(f"pose ({x}, {y}) lies outside the map")
    return [trace_ray(grid, x, y, a, sensor.max_range, occupied) for a in sensor.angles(heading)]


def binary_entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.where((p <= 0) | (p >= 1), 0.0, h)


@dataclass
class World:
    """Fixed prior map plus signal sources, with per-cell information weights cached."""

    grid: OccupancyGrid
    sources: tuple[SignalSource, ...] = ()
    sensor: SensorModel = field(default_factory=SensorModel)
    occupied: float = OCCUPIED

    def __post_init__(self):
        self.sources = tuple(self.sources)
        centers = self.grid.centers()
        weights = binary_entropy(self.grid.cells) * (1.0 + signal_strength(self.sources, centers))
        self.weights = weights.ravel()
        occ = self.grid.cells >= self.occupied
        rows, cols = np.nonzero(occ)
        self.occupied_centers = np.stack(self.grid.cell_center(rows, cols), axis=-1).reshape(-1, 2)

    @property
    def n_cells(self) -> int:
        return self.grid.width * self.grid.height

    def remaining_entropy(self, state: "InfoState | None" = None) -> float:
        h = binary_entropy(self.grid.cells).ravel()
        if state is None:
            return float(h.sum())
        return float(h[~state.mask(self.n_cells)].sum())


class InfoState:
    """Set of cells already counted along a path, as an immutable packed bitset."""

    __slots__ = ("_bits",)

    def __init__(self, bits: np.ndarray | None = None):
        self._bits = bits

    def mask(self, n: int) -> np.ndarray:
        if self._bits is None:
            return np.zeros(n, dtype=bool)
        return np.unpackbits(self._bits, count=n).astype(bool)

    def extended(self, n: int, cells: np.ndarray) -> "InfoState":
        m = self.mask(n)
        m[cells] = True
        return InfoState(np.packbits(m))

    def count(self, n: int) -> int:
        return int(self.mask(n).sum())


def visible_cells(world: World, pose: Sequence[float]) -> np.ndarray:
    """Flat indices of the unique cells seen from ``pose``."""
    traces = cast_beams(world.grid, pose, world.sensor, world.occupied)
    w = world.grid.width
    flat = [r * w + c for tr in traces for r, c in tr]
    return np.unique(np.asarray(flat, dtype=np.int64))


def information(prior: float, state: InfoState, pose: Sequence[float], world: World) -> tuple[float, InfoState]:
    """Accumulated information after observing from ``pose``.

    Each cell contributes its binary entropy weighted by ``1 + signal`` the
    first time it is seen along the path; returns the new total and state.
    """
    cells = visible_cells(world, pose)
    n = world.n_cells
    seen = state.mask(n)
    new = cells[~seen[cells]]
    gain = float(world.weights[new].sum())
    return prior + gain, state.extended(n, new)


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.hypot(*np.moveaxis(points - a, -1, 0))
    t = np.clip(((points - a) @ ab) / L2, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.hypot(*np.moveaxis(points - proj, -1, 0))


def _box_distances(point: np.ndarray, centers: np.ndarray, half: float) -> np.ndarray:
    gap = np.maximum(np.abs(point - centers) - half, 0.0)
    return np.hypot(gap[:, 0], gap[:, 1])


def _segment_hits_boxes(a: np.ndarray, b: np.ndarray, centers: np.ndarray, half: float) -> np.ndarray:
    """Slab test of segment ab against axis-aligned squares."""
    d = b - a
    t0 = np.zeros(len(centers))
    t1 = np.ones(len(centers))
    for k in range(2):
        lo, hi = centers[:, k] - half, centers[:, k] + half
        if d[k] == 0.0:
            outside = (a[k] < lo) | (a[k] > hi)
            t1 = np.where(outside, -1.0, t1)
            continue
        ta, tb = (lo - a[k]) / d[k], (hi - a[k]) / d[k]
        t0 = np.maximum(t0, np.minimum(ta, tb))
        t1 = np.minimum(t1, np.maximum(ta, tb))
    return t0 <= t1


def segment_cell_distances(a, b, centers: np.ndarray, half: float) -> np.ndarray:
    """Exact distance from segment ab to each square cell (0 when they meet).

    For disjoint convex sets the minimum is attained between a vertex of one
    and the other set, so only box corners and segment endpoints matter.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    corners = centers[:, None, :] + half * np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=float)
    dist = np.minimum(_segment_distances(corners, a, b).min(axis=1),
                      np.minimum(_box_distances(a, centers, half), _box_distances(b, centers, half)))
    return np.where(_segment_hits_boxes(a, b, centers, half), 0.0, dist)


def no_collision(world: World, a, b, robot_radius: float = 0.4) -> bool:
    """True iff segment ab keeps more than ``robot_radius`` from every occupied cell.

    Cells are the full squares, not their centers. Points outside the map
    count as collisions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    xmin, xmax, ymin, ymax = world.grid.extent
    for p in (a, b):
        if not (xmin <= p[0] < xmax and ymin <= p[1] < ymax):
            return False
    pts = world.occupied_centers
    if len(pts) == 0:
        return True
    half = world.grid.resolution / 2
    lo = np.minimum(a, b) - robot_radius - half
    hi = np.maximum(a, b) + robot_radius + half
    near = pts[np.all((pts >= lo) & (pts <= hi), axis=1)]
    if len(near) == 0:
        return True
    return bool(np.all(segment_cell_distances(a, b, near, half) > robot_radius))


def save_map(grid: OccupancyGrid, path) -> None:
    lines = [f"OCCGRID {grid.width} {grid.height} {grid.resolution!r} {grid.origin[0]!r} {grid.origin[1]!r}"]
    for row in grid.cells:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def load_map(path) -> OccupancyGrid:
    text = Path(path).read_text(encoding="ascii")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty map file", 1)
    head = lines[0].split()
    if len(head) != 6 or head[0] != "OCCGRID":
        raise ParseError("expected 'OCCGRID width height resolution origin_x origin_y'", 1)
    try:
        width, height = int(head[1]), int(head[2])
        res, ox, oy = float(head[3]), float(head[4]), float(head[5])
    except ValueError as exc:
        raise ParseError(str(exc), 1) from None
    if width <= 0 or height <= 0:
        raise ParseError("width and height must be positive", 1)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise ParseError(str(exc), i) from None
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise ParseError("probability outside [0, 1]", i)
        rows.append(values)
    total = sum(len(r) for r in rows)
    if len(rows) != height or total != width * height or any(len(r) != width for r in rows):
        raise DimensionMismatch(f"header declares {width}x{height}={width * height} cells, file has {total} in {len(rows)} rows")
    return OccupancyGrid(np.array(rows, dtype=float), res, (ox, oy))


def single_obstacle_map(resolution: float = 0.25, size: float = 25.0, center=(10.0, 10.0),
                        radii=(1.0, 8.0)) -> OccupancyGrid:
    """Known map with one filled ellipse; every cell is 0 or 1."""
    n = int(round(size / resolution))
    grid = OccupancyGrid.filled(n, n, resolution)
    c = grid.centers()
    inside = ((c[..., 0] - center[0]) / radii[0]) ** 2 + ((c[..., 1] - center[1]) / radii[1]) ** 2 <= 1.0
    return OccupancyGrid(inside.astype(float), resolution)


CAVE_WALLS = (
    (6.0, 3.0, 7.0, 12.0),
    (12.0, 8.0, 13.0, 17.0),
    (18.0, 3.0, 19.0, 12.0),
    (23.0, 9.0, 27.0, 10.0),
    (2.0, 14.0, 6.0, 15.0),
)


def cave_like_map(seed: int = 0, resolution: float = 0.5, size=(30.0, 20.0),
                  walls=CAVE_WALLS, unknown_patches: int = 6) -> tuple[OccupancyGrid, tuple[SignalSource, ...]]:
    """Uncertain map of separated wall blocks plus two signal sources near the top edge.

    Free cells get probabilities in [0.05, 0.3], wall cells in [0.8, 0.95];
    a few square patches are fully unknown (0.5) unless they hit a wall.
    """
    rng = np.random.default_rng(seed)
    w, h = int(round(size[0] / resolution)), int(round(size[1] / resolution))
    cells = rng.uniform(0.05, 0.3, size=(h, w))
    cx, cy = OccupancyGrid.filled(w, h, resolution).centers().transpose(2, 0, 1)
    wall = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in walls:
        wall |= (cx >= x0) & (cx <= x1) & (cy >= y0) & (cy <= y1)
    for _ in range(unknown_patches):
        px, py = rng.uniform(0, size[0] - 3), rng.uniform(0, size[1] - 3)
        cells[(cx >= px) & (cx <= px + 3) & (cy >= py) & (cy <= py + 3)] = 0.5
    cells[wall] = rng.uniform(0.8, 0.95, size=int(wall.sum()))
    sources = (
        SignalSource((0.3 * size[0], size[1] - 1.0), 2.0, ((9.0, 0.0), (0.0, 4.0))),
        SignalSource((0.75 * size[0], size[1] - 1.0), 1.5, ((4.0, 0.0), (0.0, 9.0))),
    )
    return OccupancyGrid(cells, resolution), sources
