"""Shared enums, variant naming and the experiment configuration."""

from dataclasses import asdict, dataclass, fields
from enum import Enum, IntEnum
from typing import Optional

from src.errors import ConfigurationError


class Activation(str, Enum):
    """Activation functions available to CPPN nodes."""

    SIGMOID = "sigmoid"
    GAUSSIAN = "gaussian"
    SINE = "sine"
    LINEAR = "linear"
    ABS = "abs"


class ComponentType(IntEnum):
    """Component type codes as stored in the morphological descriptor."""

    WHEEL = 1
    LEG = 2
    SENSOR = 3
    CASTER = 4

    @property
    def is_actuator(self) -> bool:
        """Wheels and legs move the robot; casters do not."""
        return self in (ComponentType.WHEEL, ComponentType.LEG)


class Synchronicity(str, Enum):
    """Pool update cadence: every completion (A) or every P completions (S)."""

    ASYNC = "A"
    SYNC = "S"


class Objective(str, Enum):
    """Tournament scoring: task performance (G) or body-plan novelty (N)."""

    GOAL = "G"
    NOVELTY = "N"


class RemovalPolicy(str, Enum):
    """Which parent leaves the pool at an update."""

    OLDEST = "O"
    WORST = "W"


class LearnerStatus(str, Enum):
    """Lifecycle of one NIP-ES learner."""

    RUNNING = "running"
    DONE_BUDGET = "done-budget"
    DONE_NO_MOVE = "done-no-move"


class EventAction(str, Enum):
    """Actions recorded in a replicate's event log."""

    SEEDED = "seeded"
    ADDED = "added"
    REMOVED = "removed"
    MATED = "mated"
    UPDATED = "updated"


@dataclass(frozen=True)
class Variant:
    """An algorithm variant such as ``AGW``.

    Letter one is the update cadence, letter two the objective and letter
    three the removal policy, matching the printed names SGO, AGO, SGW, AGW
    and ANW.
    """

    sync: Synchronicity
    objective: Objective
    removal: RemovalPolicy

    @classmethod
    def parse(cls, name: str) -> "Variant":
        """Decompose a three-letter variant string."""
        name = name.strip().upper()
        if len(name) != 3:
            raise ConfigurationError(f"Invalid variant string: {name!r}")
        try:
            return cls(
                sync=Synchronicity(name[0]),
                objective=Objective(name[1]),
                removal=RemovalPolicy(name[2]),
            )
        except ValueError as exc:
            raise ConfigurationError(f"Invalid variant string: {name!r}") from exc

    @property
    def name(self) -> str:
        return f"{self.sync.value}{self.objective.value}{self.removal.value}"

    def __str__(self) -> str:
        return self.name


STUDIED_VARIANTS = ("SGO", "AGO", "SGW", "AGW", "ANW")


@dataclass
class ExperimentConfig:
    """All knobs of one experiment (a variant run over several replicates)."""

    variant: str = "AGW"
    pop_size: int = 25
    learner_budget: int = 200
    initial_population: int = 10
    k_neighbours: int = 15
    robot_budget: int = 500
    replicates: int = 1
    seed: int = 42
    cores: int = 1
    arena: Optional[str] = None
    out: str = "runs/default"
    episode_seconds: float = 60.0
    max_components: int = 8
    archive_checkpoint_every: int = 0
    sched_trace: bool = False

    @property
    def parsed_variant(self) -> Variant:
        return Variant.parse(self.variant)

    def validate(self) -> None:
        """Raise ConfigurationError on any inconsistent setting."""
        Variant.parse(self.variant)
        if self.pop_size < 4:
            # Tournaments draw four distinct parents.
            raise ConfigurationError("pop_size must be at least 4")
        if self.robot_budget < self.pop_size:
            raise ConfigurationError("robot_budget must be at least pop_size")
        if self.learner_budget < 1 or self.initial_population < 1:
            raise ConfigurationError("learner budget and population must be positive")
        if self.k_neighbours < 1:
            raise ConfigurationError("k_neighbours must be at least 1")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be at least 1")
        if self.cores < 1:
            raise ConfigurationError("cores must be at least 1")
        if self.episode_seconds <= 10.0:
            raise ConfigurationError("episode_seconds must exceed the 10 s no-move abort")
        if self.max_components < 2:
            raise ConfigurationError("max_components must allow a sensor and an actuator")
        if self.archive_checkpoint_every < 0:
            raise ConfigurationError("archive_checkpoint_every must be non-negative")

    def to_dict(self) -> dict:
        """Convert the config to a JSON-ready dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Create a config from a dictionary, ignoring unknown keys."""
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known})
