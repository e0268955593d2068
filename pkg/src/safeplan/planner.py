"""Sampling-based planners that grow trees with DCBF-MPC node expansion.

``rrt_plan`` grows a tree until a node lands in the goal ball.
``safe_iig_plan`` grows an information-gathering tree under a cost budget and
stops once the relative information contribution (RIC) of new nodes levels off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AllNodesClosed, NodeNotInTree, NoFreeSpace, SampleBudgetExhausted
from .lip import (
    FootPlacement,
    KinematicLimits,
    LipParams,
    LipState,
    ReachableBounds,
    Stance,
    heading_from_delta,
)
from .safety import BarrierSpec, barrier_value
from .trajopt import MpcConfig, dcbf_mpc_expand
from .worldmodel import OCCUPIED, InfoState, OccupancyGrid, World, information, no_collision

RIC_FLOOR = 1e-9
COST_MODES = ("length", "steps")


@dataclass(frozen=True)
class PlannerConfig:
    budget: float = 40.0
    near_radius: float = 1.0
    delta_ric: float = 5e-3
    n_ric: int = 20
    max_samples: int = 50_000
    goal_radius: float = 0.5
    rng_seed: int = 0
    prune_epsilon: float = 0.1
    cost_mode: str = "length"
    robot_radius: float = 0.4
    steer_distance: float = 1.0

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if not self.near_radius > 0:
            raise ValueError("near_radius must be positive")
        if not self.delta_ric > 0:
            raise ValueError("delta_ric must be positive")
        if self.n_ric < 1:
            raise ValueError("n_ric must be >= 1")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")
        if not self.goal_radius > 0:
            raise ValueError("goal_radius must be positive")
        if self.prune_epsilon < 0:
            raise ValueError("prune_epsilon must be nonnegative")
        if self.cost_mode not in COST_MODES:
            raise ValueError(f"cost_mode must be one of {COST_MODES}")
        if self.robot_radius < 0:
            raise ValueError("robot_radius must be nonnegative")
        if not self.steer_distance > 0:
            raise ValueError("steer_distance must be positive")


@dataclass(eq=False)
class TreeNode:
    index: int
    state: LipState
    stance: Stance
    cost: float
    info: float
    info_state: InfoState
    first_input: FootPlacement | None = None
    parent: "TreeNode | None" = None
    closed: bool = False

    @property
    def position(self) -> tuple[float, float]:
        return self.state.x, self.state.y


class PlanTree:
    """Nodes in insertion order plus a position array for neighbor queries."""

    def __init__(self):
        self.nodes: list[TreeNode] = []
        self.ric_history: list[float] = []
        self.n_sample = 0
        self._pos = np.empty((64, 2))
        self._closed = np.zeros(64, dtype=bool)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def positions(self) -> np.ndarray:
        return self._pos[: len(self.nodes)]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(n.parent.index, n.index) for n in self.nodes if n.parent is not None]

    @property
    def closed(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.closed]

    def add(self, state: LipState, stance: Stance, cost: float, info: float, info_state: InfoState,
            first_input: FootPlacement | None = None, parent: TreeNode | None = None) -> TreeNode:
        i = len(self.nodes)
        if i == len(self._pos):
            self._pos = np.concatenate([self._pos, np.empty_like(self._pos)])
            self._closed = np.concatenate([self._closed, np.zeros_like(self._closed)])
        node = TreeNode(i, state, stance, cost, info, info_state, first_input, parent)
        self.nodes.append(node)
        self._pos[i] = (state.x, state.y)
        self._closed[i] = False
        return node

    def close(self, node: TreeNode) -> None:
        node.closed = True
        self._closed[node.index] = True

    def _distances(self, query) -> np.ndarray:
        d = self.positions - np.asarray(query, dtype=float)
        return np.hypot(d[:, 0], d[:, 1])

    def contains(self, node: TreeNode) -> bool:
        return 0 <= node.index < len(self.nodes) and self.nodes[node.index] is node


def nearest(tree: PlanTree, query, exclude_closed: bool = True) -> TreeNode:
    """Euclidean-nearest node; ties go to the earliest inserted."""
    d = tree._distances(query)
    if exclude_closed:
        d = np.where(tree._closed[: len(tree)], np.inf, d)
    if len(d) == 0 or not np.isfinite(d).any():
        raise AllNodesClosed("no open node in the tree")
    return tree.nodes[int(np.argmin(d))]


def near(tree: PlanTree, query, radius: float, exclude_closed: bool = True) -> list[TreeNode]:
    """Nodes within ``radius`` (inclusive), in insertion order."""
    mask = tree._distances(query) <= radius
    if exclude_closed:
        mask &= ~tree._closed[: len(tree)]
    return [tree.nodes[i] for i in np.flatnonzero(mask)]


def steer(origin, target, max_distance: float) -> tuple[float, float]:
    """``target`` pulled back onto the disc of radius ``max_distance`` around ``origin``."""
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    dist = math.hypot(dx, dy)
    if dist <= max_distance:
        return float(target[0]), float(target[1])
    f = max_distance / dist
    return origin[0] + f * dx, origin[1] + f * dy


def cost_edge(a, b, mode: str = "length") -> float:
    if mode == "steps":
        return 1.0
    return math.hypot(b[0] - a[0], b[1] - a[1])


def prune(tree: PlanTree, position, cost: float, info: float, epsilon: float) -> bool:
    """True if an open co-located node dominates (cost, info) in the partial order."""
    for other in near(tree, position, epsilon, exclude_closed=True):
        if other.cost <= cost and other.info >= info and (other.cost < cost or other.info > info):
            return True
    return False


def average_ric(history: Sequence[float], n_ric: int) -> float:
    if len(history) < n_ric:
        return math.inf
    return float(np.mean(history[-n_ric:]))


class FreeSpaceSampler:
    """Uniform samples over cells below the occupancy threshold, jittered within the cell."""

    def __init__(self, grid: OccupancyGrid, occupied: float = OCCUPIED):
        rows, cols = np.nonzero(grid.cells < occupied)
        if len(rows) == 0:
            raise NoFreeSpace("the map has no free cell")
        self.grid = grid
        self.rows, self.cols = rows, cols

    def __call__(self, rng: np.random.Generator) -> tuple[float, float]:
        i = rng.integers(len(self.rows))
        jx, jy = rng.random(2)
        r = self.grid.resolution
        return (self.grid.origin[0] + (self.cols[i] + jx) * r,
                self.grid.origin[1] + (self.rows[i] + jy) * r)


def sample_free(grid: OccupancyGrid, rng: np.random.Generator, occupied: float = OCCUPIED) -> tuple[float, float]:
    return FreeSpaceSampler(grid, occupied)(rng)


@dataclass(frozen=True)
class PathEntry:
    state: LipState
    first_input: FootPlacement | None
    stance: Stance
    heading: tuple[float, float] | None
    cost: float
    info: float


def extract_path(tree: PlanTree, leaf: TreeNode) -> list[PathEntry]:
    """Root-to-leaf chain.

    ``heading`` is ``(sin, cos)`` of the displacement to the next waypoint
    (the last waypoint reuses the incoming one); a single-node path has
    heading ``None``.
    """
    if not tree.contains(leaf):
        raise NodeNotInTree(f"node {leaf.index} is not in this tree")
    chain = []
    node = leaf
    while node is not None:
        chain.append(node)
        node = node.parent
    chain.reverse()
    headings: list[tuple[float, float] | None] = []
    for k in range(len(chain)):
        if len(chain) == 1:
            headings.append(None)
            continue
        a, b = (chain[k], chain[k + 1]) if k + 1 < len(chain) else (chain[k - 1], chain[k])
        headings.append(heading_from_delta(b.state.x - a.state.x, b.state.y - a.state.y))
    return [PathEntry(n.state, n.first_input, n.stance, h, n.cost, n.info) for n, h in zip(chain, headings)]


@dataclass
class PlanResult:
    tree: PlanTree
    path: list[PathEntry]
    leaf: TreeNode | None
    samples: int
    converged: bool
    mpc_solves: int = 0
    alt_path: list[PathEntry] = field(default_factory=list)


@dataclass(frozen=True)
class PlanningProblem:
    """Everything the planners need besides the planner configuration."""

    world: World
    start: LipState
    start_stance: Stance = Stance.RIGHT
    barriers: BarrierSpec = field(default_factory=BarrierSpec)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    bounds: ReachableBounds = field(default_factory=ReachableBounds.cassie)
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    params: LipParams = field(default_factory=LipParams)

    def expand(self, node: TreeNode, target):
        return dcbf_mpc_expand(node.state, node.stance, target, self.barriers, self.mpc,
                               self.bounds, self.limits, self.params)


def _pose(state: LipState, parent: LipState | None) -> tuple[float, float, float]:
    ref = (state.xdot, state.ydot) if parent is None else (state.x - parent.x, state.y - parent.y)
    return state.x, state.y, math.atan2(ref[1], ref[0])


def _emit_node(sink, problem: PlanningProblem, node: TreeNode) -> None:
    if sink is None:
        return
    sink({
        "kind": "node",
        "index": node.index,
        "parent": -1 if node.parent is None else node.parent.index,
        "x": node.state.x,
        "y": node.state.y,
        "cost": node.cost,
        "info": node.info,
        "h": [barrier_value(ob, node.position) for ob in problem.barriers.obstacles],
    })


def _root(problem: PlanningProblem, tree: PlanTree, with_info: bool) -> TreeNode:
    s = problem.start
    grid = problem.world.grid
    if not grid.contains(s.x, s.y) or grid.cells[grid.cell_of(s.x, s.y)] >= problem.world.occupied:
        raise ValueError("start must lie in free space")
    info, state = 0.0, InfoState()
    if with_info:
        info, state = information(0.0, state, _pose(s, None), problem.world)
    return tree.add(s, problem.start_stance, 0.0, info, state)


def rrt_plan(problem: PlanningProblem, goal: Sequence[float], config: PlannerConfig,
             sink: Callable[[dict], None] | None = None, stop_at_goal: bool = True) -> PlanResult:
    """Grow an RRT with DCBF-MPC steering until a node reaches the goal ball.

    With ``stop_at_goal=False`` all ``max_samples`` samples are spent and the
    returned path ends at the first node that reached the goal. Raises
    ``SampleBudgetExhausted`` (carrying the result) if no node ever did.
    """
    rng = np.random.default_rng(config.rng_seed)
    sampler = FreeSpaceSampler(problem.world.grid, problem.world.occupied)
    tree = PlanTree()
    root = _root(problem, tree, with_info=False)
    _emit_node(sink, problem, root)
    goal_node = None
    solves = 0
    samples = 0
    for samples in range(1, config.max_samples + 1):
        x_rand = sampler(rng)
        n_near = nearest(tree, x_rand, exclude_closed=False)
        exp = problem.expand(n_near, steer(n_near.position, x_rand, config.steer_distance))
        solves += 1
        if not exp.is_feasible:
            continue
        new_pos = (exp.state.x, exp.state.y)
        if not no_collision(problem.world, n_near.position, new_pos, config.robot_radius):
            continue
        cost = n_near.cost + cost_edge(n_near.position, new_pos, config.cost_mode)
        node = tree.add(exp.state, exp.stance, cost, 0.0, n_near.info_state, exp.first_input, n_near)
        _emit_node(sink, problem, node)
        if goal_node is None and math.hypot(new_pos[0] - goal[0], new_pos[1] - goal[1]) <= config.goal_radius:
            goal_node = node
            if stop_at_goal:
                break
    result = PlanResult(tree, [], goal_node, samples, goal_node is not None, solves)
    if goal_node is None:
        raise SampleBudgetExhausted(f"no node reached the goal within {config.max_samples} samples", result)
    result.path = extract_path(tree, goal_node)
    return result


def max_info_leaf(tree: PlanTree) -> TreeNode:
    """Node with the largest information; ties go to lower cost, then insertion order."""
    return min(tree.nodes, key=lambda n: (-n.info, n.cost, n.index))


def min_cost_leaf(tree: PlanTree) -> TreeNode:
    """Cheapest leaf other than the root (the root itself if it has no children)."""
    has_child = {p for p, _ in tree.edges}
    leaves = [n for n in tree.nodes if n.index not in has_child and n.parent is not None]
    if not leaves:
        return tree.nodes[0]
    return min(leaves, key=lambda n: (n.cost, -n.info, n.index))


def safe_iig_plan(problem: PlanningProblem, config: PlannerConfig,
                  sink: Callable[[dict], None] | None = None) -> PlanResult:
    """Information-gathering tree search with RIC-based automatic stopping.

    Each sample is steered from the nearest open node; every open node within
    ``near_radius`` of the reached point is then steered toward it. Accepted
    nodes append ``(I_new / I_near - 1) / n_sample`` to the RIC history, and
    the search stops as soon as the trailing ``n_ric`` average drops to
    ``delta_ric`` or below. Returns the path to the most informative node.
    """
    rng = np.random.default_rng(config.rng_seed)
    world = problem.world
    sampler = FreeSpaceSampler(world.grid, world.occupied)
    tree = PlanTree()
    root = _root(problem, tree, with_info=True)
    _emit_node(sink, problem, root)
    solves = 0
    samples = 0
    converged = average_ric(tree.ric_history, config.n_ric) <= config.delta_ric

    while not converged and samples < config.max_samples:
        x_sample = sampler(rng)
        samples += 1
        tree.n_sample += 1
        n_nearest = nearest(tree, x_sample, exclude_closed=True)
        first = problem.expand(n_nearest, steer(n_nearest.position, x_sample, config.steer_distance))
        solves += 1
        if not first.is_feasible:
            continue
        x_feasible = (first.state.x, first.state.y)
        for n_near in near(tree, x_feasible, config.near_radius, exclude_closed=True):
            if n_near is n_nearest:
                exp = first
            else:
                exp = problem.expand(n_near, x_feasible)
                solves += 1
            new_pos = (exp.state.x, exp.state.y)
            if not (exp.is_feasible and no_collision(world, n_near.position, new_pos, config.robot_radius)):
                continue
            i_new, info_state = information(n_near.info, n_near.info_state, _pose(exp.state, n_near.state), world)
            c_new = n_near.cost + cost_edge(n_near.position, new_pos, config.cost_mode)
            if prune(tree, new_pos, c_new, i_new, config.prune_epsilon):
                continue
            # equals I_new / I_near - 1, and stays 0 when both are 0
            ric = (i_new - n_near.info) / max(n_near.info, RIC_FLOOR) / max(tree.n_sample, 1)
            tree.ric_history.append(ric)
            tree.n_sample = 0
            if sink is not None:
                sink({"kind": "ric", "index": len(tree.ric_history) - 1, "value": ric})
            node = tree.add(exp.state, exp.stance, c_new, i_new, info_state, exp.first_input, n_near)
            _emit_node(sink, problem, node)
            if c_new > config.budget:
                tree.close(node)
            if average_ric(tree.ric_history, config.n_ric) <= config.delta_ric:
                converged = True
                break

    best = max_info_leaf(tree)
    result = PlanResult(tree, extract_path(tree, best), best, samples, converged, solves,
                        extract_path(tree, min_cost_leaf(tree)))
    if not converged:
        raise SampleBudgetExhausted(f"RIC did not converge within {config.max_samples} samples", result)
    return result
