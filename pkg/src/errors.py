"""Exception hierarchy for the morpho-evolution engine."""


class MorphoEvoError(Exception):
    """Base class for every error raised by this package."""


class StructuralGenomeError(MorphoEvoError, ValueError):
    """A CPPN genome has a cycle, a dangling link or a duplicate link."""


class DescriptorShapeError(MorphoEvoError, ValueError):
    """Two morphological descriptors do not share the 11x11x11 shape."""


class UndefinedNoveltyError(MorphoEvoError, ValueError):
    """Novelty was requested against an empty reference set."""


class InterfaceError(MorphoEvoError, ValueError):
    """A vector or batch does not have the length its receiver expects."""


class ViabilityError(MorphoEvoError, ValueError):
    """A body-plan without sensors or actuators reached the simulator."""


class ConfigurationError(MorphoEvoError, ValueError):
    """Invalid experiment or algorithm configuration."""


class LifecycleError(MorphoEvoError, RuntimeError):
    """An operation was called in the wrong state of an object's lifecycle."""


class InitializationError(MorphoEvoError, RuntimeError):
    """The initial population could not be filled with viable robots."""


class GenerationError(MorphoEvoError, RuntimeError):
    """Mating kept producing non-viable offspring."""


class SchedulingError(MorphoEvoError, RuntimeError):
    """Duplicate or unknown evaluation task."""


class AnalysisError(MorphoEvoError, ValueError):
    """Not enough data for a requested metric."""


class CorruptRunError(MorphoEvoError, RuntimeError):
    """A run directory is missing files or has malformed artifacts."""
