"""Unit tests for the models module."""

import pytest

from src.errors import ConfigurationError
from src.models import (
    STUDIED_VARIANTS,
    ComponentType,
    ExperimentConfig,
    Objective,
    RemovalPolicy,
    Synchronicity,
    Variant,
)


class TestComponentType:
    """Test the ComponentType enum."""

    def test_descriptor_codes(self):
        """Type codes match the descriptor encoding."""
        assert [int(kind) for kind in ComponentType] == [1, 2, 3, 4]

    def test_actuators(self):
        """Only wheels and legs are actuators."""
        assert ComponentType.WHEEL.is_actuator
        assert ComponentType.LEG.is_actuator
        assert not ComponentType.SENSOR.is_actuator
        assert not ComponentType.CASTER.is_actuator


class TestVariant:
    """Test variant string parsing."""

    def test_parse_agw(self):
        """AGW is asynchronous, goal-driven, remove-worst."""
        variant = Variant.parse("AGW")
        assert variant.sync == Synchronicity.ASYNC
        assert variant.objective == Objective.GOAL
        assert variant.removal == RemovalPolicy.WORST

    def test_parse_sgo(self):
        """SGO is the canonical generational setting."""
        variant = Variant.parse("SGO")
        assert variant.sync == Synchronicity.SYNC
        assert variant.removal == RemovalPolicy.OLDEST

    def test_parse_is_case_insensitive(self):
        """Lowercase names are accepted."""
        assert Variant.parse("anw").name == "ANW"

    def test_full_matrix(self):
        """All eight cells parse and round-trip through the name."""
        names = [s + o + r for s in "AS" for o in "GN" for r in "OW"]
        assert len(names) == 8
        for name in names:
            assert str(Variant.parse(name)) == name

    def test_studied_variants_parse(self):
        """The five studied variants are valid."""
        for name in STUDIED_VARIANTS:
            Variant.parse(name)

    @pytest.mark.parametrize("name", ["", "AG", "AGWX", "XGW", "AXW", "AGX"])
    def test_invalid_variant(self, name):
        """Malformed names raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            Variant.parse(name)


class TestExperimentConfig:
    """Test the experiment configuration."""

    def test_defaults(self):
        """Defaults follow the desk-scale settings."""
        config = ExperimentConfig()
        assert config.pop_size == 25
        assert config.learner_budget == 200
        assert config.initial_population == 10
        assert config.k_neighbours == 15
        assert config.robot_budget == 500
        config.validate()

    def test_round_trip(self):
        """to_dict/from_dict preserve every field."""
        config = ExperimentConfig(variant="SGO", pop_size=8, seed=7, arena="a.map")
        assert ExperimentConfig.from_dict(config.to_dict()) == config

    def test_from_dict_ignores_unknown_keys(self):
        """Unknown keys in a config file are dropped."""
        config = ExperimentConfig.from_dict({"variant": "ANW", "colour": "blue"})
        assert config.variant == "ANW"

    def test_parsed_variant(self):
        """parsed_variant decomposes the variant string."""
        assert ExperimentConfig(variant="AGO").parsed_variant == Variant.parse("AGO")

    @pytest.mark.parametrize(
        "overrides",
        [
            {"variant": "QQQ"},
            {"pop_size": 3},
            {"robot_budget": 10, "pop_size": 25},
            {"learner_budget": 0},
            {"k_neighbours": 0},
            {"replicates": 0},
            {"cores": 0},
            {"episode_seconds": 10.0},
            {"max_components": 1},
            {"archive_checkpoint_every": -1},
        ],
    )
    def test_invalid_settings(self, overrides):
        """Inconsistent settings are rejected."""
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**overrides).validate()
