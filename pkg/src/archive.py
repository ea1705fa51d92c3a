"""Controller archive keyed by (wheels, legs, sensors) counts."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.bodyplan import BodyPlan
from src.controller import ElmanSpec, weights_dim
from src.errors import CorruptRunError, InterfaceError
from src.models import ComponentType

logger = logging.getLogger(__name__)

ArchiveKey = Tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class ArchiveEntry:
    weights: np.ndarray
    performance: float
    spec: ElmanSpec


@dataclass
class ControllerArchive:
    entries: Dict[ArchiveKey, ArchiveEntry] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: ArchiveKey) -> bool:
        return key in self.entries

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "key": list(key),
                    "performance": entry.performance,
                    "weights": entry.weights.tolist(),
                }
                for key, entry in sorted(self.entries.items())
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerArchive":
        archive = cls()
        for item in data.get("entries", []):
            key = tuple(int(v) for v in item["key"])
            archive.entries[key] = ArchiveEntry(
                weights=np.asarray(item["weights"], dtype=float),
                performance=float(item["performance"]),
                spec=spec_for_key(key),
            )
        return archive

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ControllerArchive":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CorruptRunError(f"cannot load archive snapshot {path}: {exc}") from exc


def archive_key(plan: BodyPlan) -> ArchiveKey:
    """Component counts; casters carry no controller I/O and are left out."""
    return (
        plan.count(ComponentType.WHEEL),
        plan.count(ComponentType.LEG),
        plan.count(ComponentType.SENSOR),
    )


def spec_for_key(key: ArchiveKey) -> ElmanSpec:
    wheels, legs, sensors = key
    return ElmanSpec(n_in=sensors, n_out=wheels + legs)


def archive_update(
    archive: ControllerArchive, key: ArchiveKey, weights: np.ndarray, performance: float
) -> bool:
    """Store iff the key is new or the performance is strictly better."""
    spec = spec_for_key(key)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (weights_dim(spec),):
        raise InterfaceError(
            f"key {key} expects {weights_dim(spec)} weights, got {weights.shape}"
        )
    current = archive.entries.get(key)
    if current is not None and not performance > current.performance:
        return False
    archive.entries[key] = ArchiveEntry(weights.copy(), float(performance), spec)
    logger.debug("archive %s <- %.4f", key, performance)
    return True


def archive_lookup(
    archive: ControllerArchive, key: ArchiveKey
) -> Optional[Tuple[np.ndarray, float]]:
    entry = archive.entries.get(key)
    if entry is None:
        return None
    return entry.weights.copy(), entry.performance
