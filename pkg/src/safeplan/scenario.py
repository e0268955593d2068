"""Scenario files: flat ``section.key = value`` lines with ``#`` comments.

Every key has a declared type and default; unknown keys and broken
invariants are reported against the offending key path. Lists of obstacles
and signal sources use indexed keys such as ``obstacle.0.center = 10, 10``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError
from .lip import KinematicLimits, LipParams, LipState, ReachableBounds, Stance
from .planner import COST_MODES, PlannerConfig, PlanningProblem
from .safety import BarrierSpec, Obstacle, extract_obstacles
from .trajopt import MpcConfig
from .tracksim import Mode
from .worldmodel import OccupancyGrid, SensorModel, SignalSource, World, cave_like_map, load_map, single_obstacle_map

GENERATORS = ("single_obstacle", "cave_like")
PLANNERS = ("rrt", "safe-iig")


def _vec(n: int):
    def parse(text: str) -> tuple[float, ...]:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(float(p) for p in parts)
    return parse


def _modes(text: str) -> tuple[str, ...]:
    items = tuple(p.strip() for p in text.split(",") if p.strip())
    for m in items:
        Mode(m)
    return items


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], str | None] | None = None


def positive(v):
    return None if (isinstance(v, (int, float)) and math.isfinite(v) and v > 0) else "must be positive"


def nonnegative(v):
    return None if v >= 0 else "must be nonnegative"


def at_least(lo):
    return lambda v: None if v >= lo else f"must be >= {lo}"


def choice(options):
    return lambda v: None if v in options else f"must be one of {', '.join(options)}"


def unit_interval(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


SCHEMA: dict[str, Key] = {
    "map.source": Key(str, "single_obstacle"),
    "map.file": Key(str, ""),
    "map.resolution": Key(float, 0.25, positive),
    "map.seed": Key(int, 0),
    "obstacles.mode": Key(str, "explicit", choice(("explicit", "extract"))),
    "obstacles.buffer": Key(float, 0.3, nonnegative),
    "obstacles.norm_p": Key(float, 10.0, at_least(1.0)),
    "barrier.gamma": Key(float, 0.75, unit_interval),
    "barrier.activation_radius": Key(float, 5.0, positive),
    "lip.com_height": Key(float, 0.6, positive),
    "lip.gravity": Key(float, 9.81, positive),
    "lip.step_duration": Key(float, 0.4, positive),
    "lip.mass": Key(float, 32.0, positive),
    "bounds.ub_xb": Key(float, 0.3),
    "bounds.lb_xb": Key(float, -0.2),
    "bounds.ub_yb": Key(float, 0.25),
    "bounds.lb_yb": Key(float, 0.05),
    "limits.l_min": Key(float, 0.1, positive),
    "limits.l_max": Key(float, 0.6, positive),
    "mpc.n_min": Key(int, 2, at_least(1)),
    "mpc.n_max": Key(int, 3, at_least(1)),
    "mpc.w1": Key(float, 1.0, nonnegative),
    "mpc.w2": Key(float, 10.0, nonnegative),
    "mpc.feasibility_tol": Key(float, 1e-6, positive),
    "mpc.max_iterations": Key(int, 200, at_least(1)),
    "mpc.max_evaluations": Key(int, 5000, at_least(1)),
    "mpc.l_nominal": Key(float, 0.3, positive),
    "mpc.seed_starts": Key(int, 4, at_least(1)),
    "planner.kind": Key(str, "rrt", choice(PLANNERS)),
    "planner.budget": Key(float, 40.0, positive),
    "planner.near_radius": Key(float, 0.5, positive),
    "planner.delta_ric": Key(float, 5e-3, positive),
    "planner.n_ric": Key(int, 20, at_least(1)),
    "planner.max_samples": Key(int, 50_000, at_least(1)),
    "planner.goal_radius": Key(float, 0.5, positive),
    "planner.rng_seed": Key(int, 0),
    "planner.prune_epsilon": Key(float, 0.1, nonnegative),
    "planner.cost_mode": Key(str, "length", choice(COST_MODES)),
    "planner.robot_radius": Key(float, 0.4, nonnegative),
    "planner.steer_distance": Key(float, 1.0, positive),
    "planner.stop_at_goal": Key(_bool, True),
    "start.position": Key(_vec(2), (3.0, 3.0)),
    "start.velocity": Key(_vec(2), (0.3, 0.3)),
    "start.stance": Key(str, "right", choice(("left", "right"))),
    "goal.position": Key(_vec(2), (20.0, 20.0)),
    "sensor.num_beams": Key(int, 36, at_least(1)),
    "sensor.fov": Key(float, 2 * math.pi, positive),
    "sensor.max_range": Key(float, 5.0, positive),
    "tracking.modes": Key(_modes, ("open_loop", "closed_loop")),
    "tracking.position_noise": Key(float, 0.0, nonnegative),
    "tracking.momentum_noise": Key(float, 0.0, nonnegative),
}

INDEXED: dict[str, dict[str, Key]] = {
    "obstacle": {
        "center": Key(_vec(2), None),
        "radii": Key(_vec(2), None, lambda v: None if min(v) > 0 else "radii must be positive"),
        "buffer": Key(_vec(2), (0.0, 0.0), lambda v: None if min(v) >= 0 else "buffer must be nonnegative"),
        "norm_p": Key(float, 2.0, at_least(1.0)),
        "rotation": Key(float, 0.0),
    },
    "signal": {
        "center": Key(_vec(2), None),
        "strength": Key(float, 1.0, nonnegative),
        "covariance": Key(_vec(4), (1.0, 0.0, 0.0, 1.0)),
    },
}

_INDEXED_RE = re.compile(r"^(obstacle|signal)\.(\d+)\.([a-z_]+)$")


def parse_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings; later lines override earlier ones."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        raw[key] = value
    return raw


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError("override must look like key=value", item)
    key, value = (s.strip() for s in item.split("=", 1))
    return key, value


def _spec_for(key: str) -> Key | None:
    if key in SCHEMA:
        return SCHEMA[key]
    m = _INDEXED_RE.match(key)
    if m:
        return INDEXED[m.group(1)].get(m.group(3))
    return None


@dataclass
class Scenario:
    values: dict[str, Any]
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def indexed(self, group: str) -> list[dict[str, Any]]:
        idx = sorted({int(m.group(2)) for k in self.values if (m := _INDEXED_RE.match(k)) and m.group(1) == group})
        out = []
        for i in idx:
            item = {}
            for name, spec in INDEXED[group].items():
                item[name] = self.values.get(f"{group}.{i}.{name}", spec.default)
            item["_index"] = i
            out.append(item)
        return out

    def canonical_text(self) -> str:
        """Fully resolved config; parsing it back gives the same scenario."""
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if key == "map.file" and value:
                value = str(self.map_path().resolve())
            lines.append(f"{key} = {format_value(value)}")
        return "\n".join(lines) + "\n"

    def map_path(self) -> Path:
        p = Path(self["map.file"])
        return p if p.is_absolute() else self.base_dir / p

    # builders

    def lip_params(self) -> LipParams:
        return LipParams(self["lip.com_height"], self["lip.gravity"], self["lip.step_duration"], self["lip.mass"])

    def bounds(self) -> ReachableBounds:
        return ReachableBounds(self["bounds.ub_xb"], self["bounds.lb_xb"], self["bounds.ub_yb"], self["bounds.lb_yb"])

    def limits(self) -> KinematicLimits:
        return KinematicLimits(self["limits.l_min"], self["limits.l_max"])

    def mpc_config(self) -> MpcConfig:
        return MpcConfig(
            n_min=self["mpc.n_min"], n_max=self["mpc.n_max"], w1=self["mpc.w1"], w2=self["mpc.w2"],
            gamma=self["barrier.gamma"], feasibility_tol=self["mpc.feasibility_tol"],
            max_iterations=self["mpc.max_iterations"], max_evaluations=self["mpc.max_evaluations"],
            l_nominal=self["mpc.l_nominal"], seed_starts=self["mpc.seed_starts"],
        )

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(
            budget=self["planner.budget"], near_radius=self["planner.near_radius"],
            delta_ric=self["planner.delta_ric"], n_ric=self["planner.n_ric"],
            max_samples=self["planner.max_samples"], goal_radius=self["planner.goal_radius"],
            rng_seed=self["planner.rng_seed"], prune_epsilon=self["planner.prune_epsilon"],
            cost_mode=self["planner.cost_mode"], robot_radius=self["planner.robot_radius"],
            steer_distance=self["planner.steer_distance"],
        )

    def sensor(self) -> SensorModel:
        return SensorModel(self["sensor.num_beams"], self["sensor.fov"], self["sensor.max_range"])

    def signals(self) -> tuple[SignalSource, ...]:
        out = []
        for s in self.indexed("signal"):
            c = s["covariance"]
            out.append(SignalSource(s["center"], s["strength"], ((c[0], c[1]), (c[2], c[3]))))
        return tuple(out)

    def grid(self) -> tuple[OccupancyGrid, tuple[SignalSource, ...]]:
        """Occupancy grid plus any sources that come with a built-in generator."""
        src = self["map.source"]
        if src == "file":
            return load_map(self.map_path()), ()
        if src == "single_obstacle":
            return single_obstacle_map(self["map.resolution"]), ()
        return cave_like_map(self["map.seed"], self["map.resolution"])

    def world_and_barriers(self) -> tuple[World, BarrierSpec]:
        grid, builtin = self.grid()
        sources = self.signals() or builtin
        world = World(grid, sources, self.sensor())
        if self["obstacles.mode"] == "extract":
            obstacles = extract_obstacles(grid, world.occupied, self["obstacles.buffer"], self["obstacles.norm_p"])
        else:
            obstacles = [Obstacle(o["center"], o["radii"], o["buffer"], o["norm_p"], o["rotation"])
                         for o in self.indexed("obstacle")]
        return world, BarrierSpec(tuple(obstacles), self["barrier.gamma"], self["barrier.activation_radius"])

    def start_state(self) -> LipState:
        (x, y), (vx, vy) = self["start.position"], self["start.velocity"]
        return LipState(x, vx, y, vy)

    def planning_problem(self) -> PlanningProblem:
        world, barriers = self.world_and_barriers()
        return PlanningProblem(
            world=world, start=self.start_state(), start_stance=Stance(self["start.stance"]),
            barriers=barriers, mpc=self.mpc_config(), bounds=self.bounds(), limits=self.limits(),
            params=self.lip_params(),
        )


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def resolve(raw: dict[str, str], base_dir: Path | None = None) -> tuple[Scenario, list[ConfigError]]:
    """Typed scenario plus every problem found (unknown keys, bad values, broken invariants)."""
    findings: list[ConfigError] = []
    values: dict[str, Any] = {k: spec.default for k, spec in SCHEMA.items()}
    for key, text in raw.items():
        spec = _spec_for(key)
        if spec is None:
            findings.append(ConfigError("unknown key", key))
            continue
        try:
            value = spec.parse(text)
        except ValueError as exc:
            findings.append(ConfigError(f"cannot parse {text!r}: {exc}", key))
            continue
        problem = spec.check(value) if spec.check else None
        if problem:
            findings.append(ConfigError(problem, key))
        values[key] = value
    for group, fields in INDEXED.items():
        seen = {int(m.group(2)) for k in values if (m := _INDEXED_RE.match(k)) and m.group(1) == group}
        for i in sorted(seen):
            for name, spec in fields.items():
                if spec.default is None and f"{group}.{i}.{name}" not in values:
                    findings.append(ConfigError("required", f"{group}.{i}.{name}"))
    scenario = Scenario(values, base_dir or Path.cwd())
    findings.extend(_cross_checks(scenario))
    return scenario, findings


def _cross_checks(sc: Scenario) -> list[ConfigError]:
    out = []
    if not sc["bounds.lb_xb"] < sc["bounds.ub_xb"]:
        out.append(ConfigError("must be below bounds.ub_xb", "bounds.lb_xb"))
    if not sc["bounds.lb_yb"] < sc["bounds.ub_yb"]:
        out.append(ConfigError("must be below bounds.ub_yb", "bounds.lb_yb"))
    if not sc["limits.l_min"] < sc["limits.l_max"]:
        out.append(ConfigError("must be below limits.l_max", "limits.l_min"))
    if not sc["mpc.n_min"] <= sc["mpc.n_max"]:
        out.append(ConfigError("must not exceed mpc.n_max", "mpc.n_min"))
    src = sc["map.source"]
    if src not in GENERATORS + ("file",):
        out.append(ConfigError(f"must be one of {', '.join(GENERATORS + ('file',))}", "map.source"))
    elif src == "file":
        if not sc["map.file"]:
            out.append(ConfigError("required when map.source = file", "map.file"))
        elif not sc.map_path().is_file():
            out.append(ConfigError(f"map file not found: {sc.map_path()}", "map.file"))
    for o in sc.indexed("signal"):
        c = o["covariance"]
        if c[1] != c[2] or c[0] <= 0 or c[0] * c[3] - c[1] * c[2] <= 0:
            out.append(ConfigError("covariance must be symmetric positive definite", f"signal.{o['_index']}.covariance"))
    return out


def load(path, overrides: dict[str, str] | None = None) -> tuple[Scenario, list[ConfigError]]:
    path = locate(path)
    raw = parse_text(path.read_text(encoding="utf-8"))
    raw.update(overrides or {})
    return resolve(raw, path.parent)


def bundled_names() -> list[str]:
    root = resources.files("safeplan") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def locate(name_or_path) -> Path:
    """A file path, or the name of a bundled scenario such as ``cave_like``."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    bundled = resources.files("safeplan") / "scenarios" / f"{name_or_path}.cfg"
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")
