"""Unit tests for the command-line application."""

import json
from unittest.mock import patch

import pytest

from src.errors import CorruptRunError
from src.main import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, App, build_parser


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"initial_population": 2, "k_neighbours": 15}))
    return path


class TestParser:
    """Test argument parsing."""

    def test_run_flags(self):
        args = build_parser().parse_args(
            ["run", "--variant", "SGO", "--robots", "50", "--pop", "5", "--budget", "20", "--cores", "2"]
        )
        assert args.command == "run"
        assert args.variant == "SGO"
        assert args.robot_budget == 50
        assert args.pop_size == 5
        assert args.learner_budget == 20
        assert args.cores == 2

    def test_sched_trace_flag(self):
        """The trace is off unless asked for."""
        assert build_parser().parse_args(["run"]).sched_trace is None
        assert build_parser().parse_args(["run", "--sched-trace"]).sched_trace is True

    def test_compare_needs_two_runs(self):
        args = build_parser().parse_args(["compare", "--runs", "a", "b", "--test", "mannwhitney"])
        assert args.runs == ["a", "b"]
        assert args.test == "mannwhitney"


class TestApp:
    """Test commands and exit codes."""

    def setup_method(self):
        self.app = App()

    @patch("builtins.print")
    def test_no_command(self, mock_print):
        assert self.app.run([]) == EXIT_CONFIG

    @patch("builtins.print")
    def test_bad_flag_value(self, mock_print):
        assert self.app.run(["run", "--pop", "many"]) == EXIT_CONFIG

    @patch("builtins.print")
    def test_invalid_variant(self, mock_print, tmp_path):
        assert self.app.run(["run", "--variant", "XYZ", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
        printed = " ".join(str(call.args[0]) for call in mock_print.call_args_list)
        assert "Configuration error" in printed

    @patch("builtins.print")
    def test_metrics_on_missing_run(self, mock_print, tmp_path):
        assert self.app.run(["metrics", "--run", str(tmp_path / "missing")]) == EXIT_RUNTIME

    @patch("builtins.print")
    @patch("src.main.replay_metrics", side_effect=CorruptRunError("bad log"))
    def test_runtime_error_exit_code(self, mock_replay, mock_print):
        assert self.app.run(["metrics", "--run", "somewhere"]) == EXIT_RUNTIME
        mock_print.assert_any_call("Error: bad log")

    @patch("builtins.print")
    @patch("src.main.compare", return_value=(1.5, 0.25))
    def test_compare_prints_result(self, mock_compare, mock_print):
        assert self.app.run(["compare", "--runs", "a", "b"]) == EXIT_OK
        mock_compare.assert_called_once_with("a", "b", "ranksum")
        mock_print.assert_any_call("ranksum: statistic=1.5000 p=0.25")

    @patch("builtins.print")
    def test_run_then_metrics(self, mock_print, tmp_path, config_file):
        out = tmp_path / "run"
        code = self.app.run(
            [
                "-q",
                "run",
                "--config",
                str(config_file),
                "--pop",
                "4",
                "--robots",
                "5",
                "--budget",
                "2",
                "--episode-seconds",
                "11",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert (out / "manifest.json").is_file()
        mock_print.assert_any_call(f"Run written to {out}")
        assert self.app.run(["metrics", "--run", str(out)]) == EXIT_OK
