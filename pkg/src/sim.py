"""Deterministic 2D kinematic arena for the tile-exploration task.

The arena is a 2 m square split into 8x8 tiles of which 16 are blocked.
Robots are discs driven by their wheels and legs; proximity sensors are rays
cast from the robot centre. Tile arrays are indexed ``[ix, iy]`` with iy
growing upwards.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from src.bodyplan import HEAD, BodyPlan, is_viable
from src.controller import ControllerState, spec_for_plan, step
from src.errors import ConfigurationError, InterfaceError, ViabilityError
from src.models import ComponentType

SIDE = 2.0
TILES = 8
TILE = SIDE / TILES
BLOCKED_TILES = 16

Trajectory = np.ndarray  # rows of (t, x, y)


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.1
    episode_seconds: float = 60.0
    abort_seconds: float = 10.0
    move_threshold: float = 0.05
    sensor_range: float = 1.0
    wheel_speed: float = 0.15
    wheel_turn: float = 0.75
    leg_factor: float = 0.5
    leg_noise: float = 0.05
    max_speed: float = 0.4
    max_turn: float = 2.0
    base_radius: float = 0.05
    radius_per_voxel: float = 0.01
    max_radius: float = 0.12

    @property
    def steps(self) -> int:
        return int(round(self.episode_seconds / self.dt))

    @property
    def abort_step(self) -> int:
        return int(round(self.abort_seconds / self.dt))


DEFAULT_LAYOUT = (
    "........",
    ".######.",
    ".#....#.",
    ".#....#.",
    "......#.",
    "....###.",
    "....##..",
    "........",
)
# Centre of the open lower-left quadrant, facing +x.
DEFAULT_START = (SIDE / 4, SIDE / 4, 0.0)


@dataclass(frozen=True, eq=False)
class Arena:
    """Blocked-tile mask plus the start pose (x, y, heading)."""

    blocked: np.ndarray
    start: Tuple[float, float, float] = DEFAULT_START

    def __post_init__(self):
        if self.blocked.shape != (TILES, TILES):
            raise ConfigurationError("arena mask must be 8x8")
        if int(self.blocked.sum()) != BLOCKED_TILES:
            raise ConfigurationError(
                f"arena must block exactly {BLOCKED_TILES} tiles, got {int(self.blocked.sum())}"
            )
        x, y, _ = self.start
        if not (0.0 < x < SIDE and 0.0 < y < SIDE):
            raise ConfigurationError("start pose lies outside the arena")
        if self.blocked[tile_of(x, y)]:
            raise ConfigurationError("start tile is blocked")

    @classmethod
    def default(cls) -> "Arena":
        return cls.loads("\n".join(DEFAULT_LAYOUT))

    @classmethod
    def loads(cls, text: str) -> "Arena":
        """Parse 8 mask rows (top row first, '#' blocked) and a 'start x y heading' line."""
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        rows = [line for line in lines if not line.startswith("start")]
        starts = [line for line in lines if line.startswith("start")]
        if len(rows) != TILES or any(len(row) != TILES or set(row) - {"#", "."} for row in rows):
            raise ConfigurationError("arena file needs 8 rows of 8 '#'/'.' characters")
        blocked = np.zeros((TILES, TILES), dtype=bool)
        for r, row in enumerate(rows):
            for ix, char in enumerate(row):
                blocked[ix, TILES - 1 - r] = char == "#"
        start = DEFAULT_START
        if starts:
            parts = starts[0].split()
            try:
                start = (float(parts[1]), float(parts[2]), float(parts[3]))
            except (IndexError, ValueError) as exc:
                raise ConfigurationError(f"bad start line: {starts[0]!r}") from exc
        return cls(blocked=blocked, start=start)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Arena":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read arena file {path}: {exc}") from exc
        return cls.loads(text)

    def dumps(self) -> str:
        rows = [
            "".join("#" if self.blocked[ix, iy] else "." for ix in range(TILES))
            for iy in reversed(range(TILES))
        ]
        x, y, heading = self.start
        return "\n".join(rows) + f"\nstart {x!r} {y!r} {heading!r}\n"

    def is_blocked(self, ix: int, iy: int) -> bool:
        if not (0 <= ix < TILES and 0 <= iy < TILES):
            return True
        return bool(self.blocked[ix, iy])

    def collides(self, x: float, y: float, radius: float) -> bool:
        """Whether a disc overlaps the outer walls or a blocked tile."""
        if x < radius or y < radius or x > SIDE - radius or y > SIDE - radius:
            return True
        for ix in range(int((x - radius) // TILE), int((x + radius) // TILE) + 1):
            for iy in range(int((y - radius) // TILE), int((y + radius) // TILE) + 1):
                if not (0 <= ix < TILES and 0 <= iy < TILES) or not self.blocked[ix, iy]:
                    continue
                cx = min(max(x, ix * TILE), (ix + 1) * TILE)
                cy = min(max(y, iy * TILE), (iy + 1) * TILE)
                if (x - cx) ** 2 + (y - cy) ** 2 < radius * radius:
                    return True
        return False

    def raycast(self, x: float, y: float, angle: float, max_range: float) -> float:
        """Distance to the first wall or blocked tile along a ray, capped at max_range."""
        dx, dy = math.cos(angle), math.sin(angle)
        ix, iy = tile_of(x, y)
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        t_max_x = ((ix + (dx > 0)) * TILE - x) / dx if dx != 0 else math.inf
        t_max_y = ((iy + (dy > 0)) * TILE - y) / dy if dy != 0 else math.inf
        t_delta_x = TILE / abs(dx) if dx != 0 else math.inf
        t_delta_y = TILE / abs(dy) if dy != 0 else math.inf
        while True:
            if t_max_x < t_max_y:
                distance = t_max_x
                ix += step_x
                t_max_x += t_delta_x
            else:
                distance = t_max_y
                iy += step_y
                t_max_y += t_delta_y
            if distance >= max_range:
                return max_range
            if self.is_blocked(ix, iy):
                return distance


def tile_of(x: float, y: float) -> Tuple[int, int]:
    ix = min(max(int(x // TILE), 0), TILES - 1)
    iy = min(max(int(y // TILE), 0), TILES - 1)
    return ix, iy


@dataclass(frozen=True, eq=False)
class EvalResult:
    fitness: float
    trajectory: Trajectory
    behaviour: np.ndarray
    moved: bool
    evaluation_seconds: float

    def to_dict(self, with_trajectory: bool = False) -> dict:
        data = {
            "fitness": self.fitness,
            "behaviour": self.behaviour.astype(int).tolist(),
            "moved": self.moved,
            "evaluation_seconds": self.evaluation_seconds,
        }
        if with_trajectory:
            data["trajectory"] = self.trajectory.tolist()
        return data


def behaviour_descriptor(traj: Trajectory, arena: Arena) -> np.ndarray:
    """8x8 binary matrix of the tiles containing at least one trajectory point."""
    cells = np.zeros((TILES, TILES), dtype=np.int8)
    for _, x, y in np.asarray(traj, dtype=float):
        cells[tile_of(x, y)] = 1
    return cells


def behaviour_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared norm of the difference; the Hamming distance on binary matrices."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sum(diff * diff))


@dataclass(frozen=True)
class _Actuator:
    kind: ComponentType
    lateral: float


def _robot_geometry(plan: BodyPlan, params: SimParams):
    extent_x, extent_y, _ = plan.extents()
    radius = min(params.base_radius + params.radius_per_voxel * max(extent_x, extent_y),
                 params.max_radius)
    sensor_angles = []
    for sensor in plan.sensors:
        i, j, _ = sensor.position
        forward, lateral = i - HEAD[0], j - HEAD[1]
        sensor_angles.append(math.atan2(lateral, forward) if (forward or lateral) else 0.0)
    actuators = [
        _Actuator(component.type, (component.position[1] - HEAD[1]) / HEAD[1])
        for component in plan.actuators
    ]
    return radius, sensor_angles, actuators


def _velocities(outputs: np.ndarray, actuators: List[_Actuator], params: SimParams):
    speed, turn = 0.0, 0.0
    for command, actuator in zip(outputs, actuators):
        gain = 1.0 if actuator.kind == ComponentType.WHEEL else params.leg_factor
        speed += gain * params.wheel_speed * command
        # A left-side actuator pushing forward turns the robot clockwise.
        turn -= gain * params.wheel_turn * command * actuator.lateral
    speed = min(max(speed, -params.max_speed), params.max_speed)
    turn = min(max(turn, -params.max_turn), params.max_turn)
    return speed, turn


def run_episode(
    plan: BodyPlan,
    weights: np.ndarray,
    arena: Arena,
    seed: int,
    params: SimParams = SimParams(),
) -> EvalResult:
    """Simulate one controller on one body-plan for the exploration task."""
    if not is_viable(plan):
        raise ViabilityError("body-plan needs at least one sensor and one wheel or leg")
    state = ControllerState(spec_for_plan(plan), np.asarray(weights, dtype=float))
    radius, sensor_angles, actuators = _robot_geometry(plan, params)
    legs = sum(1 for a in actuators if a.kind == ComponentType.LEG)
    rng = np.random.default_rng(seed)

    x, y, heading = arena.start
    x0, y0 = x, y
    points = [(0.0, x, y)]
    moved = False
    for n in range(1, params.steps + 1):
        readings = np.array([
            max(0.0, 1.0 - arena.raycast(x, y, heading + angle, params.sensor_range)
                / params.sensor_range)
            for angle in sensor_angles
        ])
        outputs, state = step(state, readings)
        speed, turn = _velocities(outputs, actuators, params)
        if legs:
            heading += float(rng.normal(0.0, params.leg_noise, size=legs).sum())
        heading += turn * params.dt
        dx = speed * math.cos(heading) * params.dt
        dy = speed * math.sin(heading) * params.dt
        if not arena.collides(x + dx, y + dy, radius):
            x, y = x + dx, y + dy
        elif not arena.collides(x + dx, y, radius):
            x = x + dx
        elif not arena.collides(x, y + dy, radius):
            y = y + dy
        points.append((n * params.dt, x, y))
        if math.hypot(x - x0, y - y0) > params.move_threshold:
            moved = True
        if n == params.abort_step and not moved:
            break

    trajectory = np.array(points)
    behaviour = behaviour_descriptor(trajectory, arena)
    return EvalResult(
        fitness=float(behaviour.sum()) / (TILES * TILES),
        trajectory=trajectory,
        behaviour=behaviour,
        moved=moved,
        evaluation_seconds=float(trajectory[-1, 0]),
    )


def export_trajectory(traj: Trajectory, path: Union[str, Path]) -> None:
    """Write a trajectory as CSV with columns t, x, y."""
    pd.DataFrame(np.asarray(traj), columns=["t", "x", "y"]).to_csv(path, index=False)


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    frame = pd.read_csv(path)
    if list(frame.columns) != ["t", "x", "y"]:
        raise InterfaceError(f"{path} is not a trajectory CSV")
    return frame.to_numpy(dtype=float)
