#!/usr/bin/env python3
"""
Integration tests for the ``mavnav`` command line: exit codes, printed
diagnostics and files written under ``--out``.
"""

import io
import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import patch

import pandas as pd
import pytest
import yaml

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from mav_nav.pipeline.runner import (  # noqa: E402
    EXIT_FAILURE,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    load_project_config,
    logging_config,
    main,
    parse_bin,
)

from tests import CONFIG_PATH, scenario_data, scenario_path  # noqa: E402


class _CliCase(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def _main(self, *argv):
        """Run the CLI, returning (exit code, stdout, stderr)."""
        with patch("sys.stdout", new_callable=io.StringIO) as out, patch(
            "sys.stderr", new_callable=io.StringIO
        ) as err:
            code = main(["--config", CONFIG_PATH, *argv])
        return code, out.getvalue(), err.getvalue()

    def _write_scenario(self, data, name="scenario.yaml") -> str:
        path = os.path.join(self.temp_dir, name)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(data, f)
        return path


@pytest.mark.integration
class TestRunCommand(_CliCase):
    def test_trivial_scenario(self):
        out_dir = os.path.join(self.temp_dir, "out")
        code, stdout, _ = self._main(
            "run", "--scenario", scenario_path("trivial"), "--out", out_dir
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Success: True", stdout)
        log = pd.read_csv(os.path.join(out_dir, "mission_log.csv"))
        self.assertGreaterEqual(len(log), 1)
        self.assertTrue(os.path.exists(os.path.join(out_dir, "logs", "mav_nav.log")))

    def test_unknown_key_names_section_and_key(self):
        path = self._write_scenario(scenario_data(planner={"bogus": 1}))
        code, _, stderr = self._main("run", "--scenario", path, "--out", self.temp_dir)
        self.assertEqual(code, EXIT_INPUT_ERROR)
        self.assertIn("planner.bogus", stderr)

    def test_missing_scenario(self):
        missing = os.path.join(self.temp_dir, "absent.yaml")
        code, _, stderr = self._main("run", "--scenario", missing, "--out", self.temp_dir)
        self.assertEqual(code, EXIT_INPUT_ERROR)
        self.assertIn("absent.yaml", stderr)

    def test_failed_mission_exit_code(self):
        out_dir = os.path.join(self.temp_dir, "out")
        code, stdout, _ = self._main(
            "run", "--scenario", scenario_path("walled_off"), "--out", out_dir
        )
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("Success: False", stdout)
        with open(os.path.join(out_dir, "report.txt"), encoding="utf-8") as f:
            self.assertIn("success=false", f.read().splitlines())

    def test_seed_override(self):
        out_dir = os.path.join(self.temp_dir, "out")
        code, stdout, _ = self._main(
            "run", "--scenario", scenario_path("trivial"), "--out", out_dir, "--seed", "9"
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("(seed 9)", stdout)


@pytest.mark.integration
class TestPlanCommand(_CliCase):
    def test_open_field_plan(self):
        code, stdout, _ = self._main(
            "plan", "--scenario", scenario_path("open_field"), "--out", self.temp_dir
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Plan Result:", stdout)
        frame = pd.read_csv(os.path.join(self.temp_dir, "trajectory.csv"))
        self.assertAlmostEqual(float(frame["px"].iloc[0]), 2.0)
        self.assertLessEqual(abs(float(frame["px"].iloc[-1]) - 8.0), 0.125 + 1e-9)
        self.assertAlmostEqual(float(frame["vx"].iloc[-1]), 0.0, delta=0.5 + 1e-9)

    def test_no_path(self):
        code, _, stderr = self._main(
            "plan", "--scenario", scenario_path("walled_off"), "--out", self.temp_dir
        )
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("No path", stderr)
        self.assertFalse(os.path.exists(os.path.join(self.temp_dir, "trajectory.csv")))


@pytest.mark.integration
class TestMapCommand(_CliCase):
    """Rebuilding the map from a scan log recorded by run."""

    def _record(self) -> str:
        scenario = self._write_scenario(
            scenario_data(
                world={
                    "bounds": {"min": [0.0, 0.0, 0.0], "max": [10.0, 10.0, 5.0]},
                    "static": [{"min": [6.0, 1.0, 0.0], "max": [7.0, 9.0, 4.0]}],
                },
                goals=[{"position": [3.0, 5.0, 2.0]}],
                mission={"mode": "direct", "max_duration": 3.0},
            )
        )
        run_dir = os.path.join(self.temp_dir, "run")
        self._main("run", "--scenario", scenario, "--out", run_dir, "--record-scans")
        return scenario

    def test_replay_matches_mission_map(self):
        scenario = self._record()
        map_dir = os.path.join(self.temp_dir, "map")
        scans = os.path.join(self.temp_dir, "run", "scans.csv")
        code, stdout, _ = self._main(
            "map", "--scenario", scenario, "--scans", scans, "--out", map_dir
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Map Result:", stdout)
        with open(os.path.join(self.temp_dir, "run", "map.csv"), "rb") as f, open(
            os.path.join(map_dir, "map.csv"), "rb"
        ) as g:
            self.assertEqual(f.read(), g.read())

    def test_missing_scan_log(self):
        code, _, stderr = self._main(
            "map",
            "--scenario",
            scenario_path("trivial"),
            "--scans",
            os.path.join(self.temp_dir, "none.csv"),
            "--out",
            self.temp_dir,
        )
        self.assertEqual(code, EXIT_INPUT_ERROR)
        self.assertIn("Scan log not found", stderr)


@pytest.mark.integration
class TestHeuristicCommands(_CliCase):
    """Building and inspecting 1D heuristic tables."""

    def _build(self, name: str) -> str:
        table = os.path.join(self.temp_dir, name)
        code, stdout, _ = self._main(
            "heuristic", "build", "--scenario", scenario_path("open_field"), "--table", table
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("entries written", stdout)
        return table

    def test_rebuild_is_byte_identical(self):
        first, second = self._build("a.csv"), self._build("b.csv")
        with open(first, "rb") as f, open(second, "rb") as g:
            self.assertEqual(f.read(), g.read())

    def test_inspect_bins(self):
        table = self._build("table.csv")
        code, stdout, _ = self._main(
            "heuristic", "inspect", "--table", table, "--bin", "0,0", "--bin", "4,0"
        )
        self.assertEqual(code, EXIT_OK)
        lines = stdout.splitlines()
        self.assertEqual(lines[0], "0,0,0.0,0.0")
        d_bin, v_bin, time, control = lines[1].split(",")
        self.assertEqual((d_bin, v_bin), ("4", "0"))
        self.assertGreater(float(time), 0.0)

    def test_inspect_out_of_range(self):
        table = self._build("table.csv")
        code, _, stderr = self._main("heuristic", "inspect", "--table", table, "--bin", "0,99")
        self.assertEqual(code, EXIT_INPUT_ERROR)
        self.assertIn("out of range", stderr)

    def test_inspect_missing_table(self):
        code, _, _ = self._main(
            "heuristic", "inspect", "--table", os.path.join(self.temp_dir, "none.csv")
        )
        self.assertEqual(code, EXIT_INPUT_ERROR)

    def test_default_table_location(self):
        code, _, _ = self._main(
            "heuristic", "build", "--scenario", scenario_path("trivial"), "--out", self.temp_dir
        )
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(self.temp_dir, "heuristic_table.csv")))


@pytest.mark.integration
class TestValidateCommand(_CliCase):
    def test_valid_scenario(self):
        code, stdout, _ = self._main("validate", "--scenario", scenario_path("doorway"))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Valid: True", stdout)
        self.assertIn("static_boxes: 5", stdout)
        self.assertIn("dynamic_boxes: 1", stdout)

    def test_dump_round_trips(self):
        code, stdout, _ = self._main(
            "validate", "--scenario", scenario_path("passage"), "--dump", "--mode", "multires"
        )
        self.assertEqual(code, EXIT_OK)
        dumped = stdout[stdout.index("name: passage") :]
        path = self._write_scenario(yaml.safe_load(dumped), "dumped.yaml")
        code, again, _ = self._main("validate", "--scenario", path, "--dump")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(again[again.index("name: passage") :], dumped)
        self.assertIn("mode: multiresolution", dumped)

    def test_invalid_scenario(self):
        path = self._write_scenario(scenario_data(mav={"start": [50.0, 5.0, 2.0]}))
        code, _, stderr = self._main("validate", "--scenario", path)
        self.assertEqual(code, EXIT_INPUT_ERROR)
        self.assertIn("outside world bounds", stderr)


@pytest.mark.integration
class TestRunnerHelpers(unittest.TestCase):
    def test_parse_bin(self):
        self.assertEqual(parse_bin("3,-1"), (3, -1))
        with self.assertRaises(Exception):
            parse_bin("3")

    def test_bad_bin_is_rejected_by_argparse(self):
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit) as ctx:
                main(["heuristic", "inspect", "--table", "t.csv", "--bin", "x"])
        self.assertEqual(ctx.exception.code, 2)

    def test_project_config(self):
        project = load_project_config(CONFIG_PATH)
        self.assertEqual(project["outputs"]["mission_log"], "mission_log.csv")
        self.assertEqual(load_project_config("/nonexistent/config.yaml"), {})

    def test_logging_config_merges_scenario_levels(self):
        from mav_nav.io.schema import Scenario

        scenario = Scenario.model_validate(scenario_data(logging={"level": "DEBUG"}))
        config = logging_config(load_project_config(CONFIG_PATH), scenario, "/tmp/run")
        self.assertEqual(config["level"], "DEBUG")
        self.assertEqual(config["console_level"], "INFO")
        self.assertEqual(config["log_dir"], os.path.join("/tmp/run", "logs"))
        self.assertEqual(config["backup_count"], 5)


if __name__ == "__main__":
    unittest.main()
