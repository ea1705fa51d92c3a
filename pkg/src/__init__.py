"""Joint body-plan and controller evolution for desk-scale exploration robots."""

__version__ = "0.1.0"
