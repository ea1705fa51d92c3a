"""Body-plans: CPPN decoding, repair, viability and morphological novelty."""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from src.cppn import CppnGenome, query_many, radial_input
from src.errors import DescriptorShapeError, UndefinedNoveltyError
from src.models import ComponentType

GRID = 11
SHAPE = (GRID, GRID, GRID)
HEAD = (5, 5, 5)
# Penalty for a mismatched or unpaired component; equals the grid dimension.
MISMATCH_PENALTY = 11.0

Position = Tuple[int, int, int]
MorphDescriptor = np.ndarray

_FACE_OFFSETS = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
)


@dataclass(frozen=True)
class Component:
    position: Position
    type: ComponentType


@dataclass(frozen=True)
class DecodeParams:
    """Decoding thresholds. ``max_components`` keeps the highest-presence cells."""

    material_threshold: float = 0.0
    presence_threshold: float = 0.0
    max_components: int = 8


@dataclass(frozen=True, eq=False)
class BodyPlan:
    """11x11x11 voxel chassis plus typed surface components."""

    voxels: np.ndarray
    components: Tuple[Component, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BodyPlan):
            return NotImplemented
        return bool(np.array_equal(self.voxels, other.voxels)) and (
            self.components == other.components
        )

    def count(self, kind: ComponentType) -> int:
        return sum(1 for component in self.components if component.type == kind)

    @property
    def sensors(self) -> Tuple[Component, ...]:
        return tuple(c for c in self.components if c.type == ComponentType.SENSOR)

    @property
    def actuators(self) -> Tuple[Component, ...]:
        return tuple(c for c in self.components if c.type.is_actuator)

    def extents(self) -> Tuple[int, int, int]:
        """Bounding-box size of the chassis along each grid axis (0 if empty)."""
        occupied = np.argwhere(self.voxels)
        if occupied.size == 0:
            return (0, 0, 0)
        span = occupied.max(axis=0) - occupied.min(axis=0) + 1
        return tuple(int(s) for s in span)

    def to_dict(self) -> dict:
        """Dense occupancy array plus the component list."""
        return {
            "voxels": self.voxels.astype(int).tolist(),
            "components": [[list(c.position), int(c.type)] for c in self.components],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BodyPlan":
        return cls(
            voxels=np.asarray(data["voxels"], dtype=bool),
            components=tuple(
                Component(tuple(int(v) for v in pos), ComponentType(kind))
                for pos, kind in data["components"]
            ),
        )


def grid_coordinates() -> np.ndarray:
    """All 11^3 cells as normalised CPPN inputs (x, y, z, d), C order."""
    axis = (np.arange(GRID) - HEAD[0]) / HEAD[0]
    xyz = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    return np.column_stack([xyz, radial_input(xyz)])


_COORDS = grid_coordinates()


def surface_voxels(voxels: np.ndarray) -> np.ndarray:
    """Occupied cells with at least one empty (or out-of-grid) face neighbour."""
    padded = np.pad(voxels, 1, constant_values=False)
    exposed = np.zeros(voxels.shape, dtype=bool)
    for dx, dy, dz in _FACE_OFFSETS:
        neighbour = padded[
            1 + dx: 1 + dx + GRID, 1 + dy: 1 + dy + GRID, 1 + dz: 1 + dz + GRID
        ]
        exposed |= ~neighbour
    return voxels & exposed


def component_type(value: float) -> ComponentType:
    """Quantize a type output into four equal bins over [-1, 1]."""
    clipped = min(max(float(value), -1.0), 1.0)
    index = min(int(np.floor((clipped + 1.0) / 0.5)), 3)
    return ComponentType(index + 1)


def decode(genome: CppnGenome, params: DecodeParams = DecodeParams()) -> BodyPlan:
    """Query the CPPN at every cell and build the raw (unrepaired) body-plan."""
    outputs = query_many(genome, _COORDS).reshape(SHAPE + (3,))
    voxels = outputs[..., 0] > params.material_threshold
    presence = outputs[..., 1]
    candidates = surface_voxels(voxels) & (presence > params.presence_threshold)
    positions = [tuple(int(v) for v in p) for p in np.argwhere(candidates)]
    # argwhere is lexicographic, and the sort is stable, so ties keep that order.
    positions.sort(key=lambda p: -presence[p])
    chosen = sorted(positions[: params.max_components])
    components = tuple(Component(p, component_type(outputs[p + (2,)])) for p in chosen)
    return BodyPlan(voxels=voxels, components=components)


def repair(raw: BodyPlan) -> BodyPlan:
    """Keep the 26-connected chassis piece holding the head; drop orphaned components."""
    voxels = raw.voxels.copy()
    voxels[HEAD] = True
    labels, _ = ndimage.label(voxels, structure=ndimage.generate_binary_structure(3, 3))
    voxels = labels == labels[HEAD]
    surface = surface_voxels(voxels)
    seen = set()
    components = []
    for component in raw.components:
        if surface[component.position] and component.position not in seen:
            seen.add(component.position)
            components.append(component)
    return BodyPlan(voxels=voxels, components=tuple(components))


def is_viable(plan: BodyPlan) -> bool:
    """At least one sensor and one wheel or leg."""
    return bool(plan.sensors) and bool(plan.actuators)


def develop(genome: CppnGenome, params: DecodeParams = DecodeParams()) -> BodyPlan:
    """decode followed by repair."""
    return repair(decode(genome, params))


def morph_descriptor(plan: BodyPlan) -> MorphDescriptor:
    """Type codes at component positions, zero elsewhere."""
    cells = np.zeros(SHAPE, dtype=np.int8)
    for component in plan.components:
        cells[component.position] = int(component.type)
    return cells


def _components_of(descriptor: MorphDescriptor) -> Dict[Position, int]:
    return {
        tuple(int(v) for v in p): int(descriptor[tuple(p)]) for p in np.argwhere(descriptor)
    }


def _manhattan(a: Position, b: Position) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) + abs(a[2] - b[2])


def _directed_distance(a: MorphDescriptor, b: MorphDescriptor) -> float:
    left, right = _components_of(a), _components_of(b)
    distance = 0.0
    for position in sorted(set(left) & set(right)):
        if left[position] != right[position]:
            distance += MISMATCH_PENALTY
        del left[position], right[position]

    unpaired = 0
    for position in sorted(left):
        candidates = [p for p in right if right[p] == left[position]]
        if not candidates:
            unpaired += 1
            continue
        nearest = min(candidates, key=lambda p: (_manhattan(position, p), p))
        distance += _manhattan(position, nearest)
        del right[nearest]
    return distance + MISMATCH_PENALTY * (unpaired + len(right))


def morph_distance(a: MorphDescriptor, b: MorphDescriptor) -> float:
    """Component-set distance, symmetrised as max(d(a, b), d(b, a))."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != SHAPE or b.shape != SHAPE:
        raise DescriptorShapeError(f"descriptor shapes {a.shape} and {b.shape}, expected {SHAPE}")
    return max(_directed_distance(a, b), _directed_distance(b, a))


def knn_mean(distances: Sequence[float], k: int) -> float:
    """Mean of the k smallest distances (all of them if fewer than k)."""
    ordered = sorted(distances)
    nearest = ordered[:k]
    return float(sum(nearest) / len(nearest))


def bodyplan_novelty(
    plan: Union[BodyPlan, MorphDescriptor],
    pool_descriptors: Iterable[MorphDescriptor],
    novelty_archive: Iterable[MorphDescriptor],
    k: int,
) -> float:
    """Mean morph_distance to the k nearest descriptors of pool and archive."""
    descriptor = morph_descriptor(plan) if isinstance(plan, BodyPlan) else plan
    references: List[MorphDescriptor] = list(pool_descriptors) + list(novelty_archive)
    if not references:
        raise UndefinedNoveltyError("novelty needs at least one reference descriptor")
    return knn_mean([morph_distance(descriptor, other) for other in references], k)
