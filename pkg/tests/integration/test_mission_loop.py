#!/usr/bin/env python3
"""
Integration tests for the closed mission loop: planner, tracker, controller,
filter, map and plant wired together by the simulator.
"""

import json
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd
import pytest

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from mav_nav.io.readers.scan_log import read_scan_log  # noqa: E402
from mav_nav.io.readers.scenario import load_scenario  # noqa: E402
from mav_nav.io.schema import Scenario  # noqa: E402
from mav_nav.io.writers.csv import MISSION_LOG_COLUMNS  # noqa: E402
from mav_nav.pipeline.simulator import (  # noqa: E402
    MissionSimulator,
    map_from_scans,
    run_mission,
)

from tests import scenario_data, scenario_path  # noqa: E402


def _read_events(out_dir: str):
    with open(os.path.join(out_dir, "events.ndjson"), encoding="utf-8") as f:
        return [json.loads(line) for line in f]


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


@pytest.mark.integration
class TestTrivialMission(unittest.TestCase):
    """Goal equal to start ends on the first tick."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_completes_immediately(self):
        report = run_mission(load_scenario(scenario_path("trivial")), out_dir=self.temp_dir)
        self.assertTrue(report.success)
        self.assertEqual(report.reason, "completed")
        self.assertEqual(report.goals_reached, 1)
        self.assertLess(report.duration, 1.0)
        self.assertEqual(report.metrics["plan_failures"], 0)

    def test_writes_outputs(self):
        run_mission(load_scenario(scenario_path("trivial")), out_dir=self.temp_dir)
        for name in ("mission_log.csv", "map.csv", "report.txt", "summary.json", "events.ndjson"):
            self.assertTrue(os.path.exists(os.path.join(self.temp_dir, name)), name)

        log = pd.read_csv(os.path.join(self.temp_dir, "mission_log.csv"))
        self.assertEqual(list(log.columns), MISSION_LOG_COLUMNS)
        self.assertGreaterEqual(len(log), 1)

        with open(os.path.join(self.temp_dir, "report.txt"), encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "scenario=trivial")
        self.assertIn("success=true", lines)

        events = [e["event"] for e in _read_events(self.temp_dir)]
        self.assertEqual(events[0], "mission_initialized")
        self.assertIn("goal_reached", events)
        self.assertEqual(events[-1], "final_summary_written")

    def test_runs_without_output_directory(self):
        simulator = MissionSimulator(load_scenario(scenario_path("trivial")))
        report = simulator.run()
        self.assertTrue(report.success)
        self.assertEqual(len(simulator.rows), int(round(report.duration / 0.02)) + 1)
        self.assertEqual(simulator.summary.events[-1]["event"], "final_summary_written")


@pytest.mark.integration
class TestOpenFieldMission(unittest.TestCase):
    """Planned flight across an obstacle-free field."""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.mkdtemp()
        cls.scenario = load_scenario(scenario_path("open_field"))
        cls.out_dir = os.path.join(cls.temp_dir, "first")
        cls.report = run_mission(cls.scenario, out_dir=cls.out_dir)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.temp_dir)

    def test_reaches_goal(self):
        self.assertTrue(self.report.success, self.report.reason)
        self.assertEqual(self.report.goals_reached, 1)
        self.assertLessEqual(self.report.goals[0].final_error, 0.15)
        self.assertLess(self.report.duration, self.scenario.mission.max_duration)

    def test_replans_keep_committed_prefix(self):
        self.assertGreaterEqual(self.report.metrics["plans"], 1)
        self.assertGreaterEqual(self.report.metrics["replans"], 3)
        self.assertTrue(self.report.prefix_preserved)
        replans = [e for e in _read_events(self.out_dir) if e["event"] == "replan"]
        self.assertTrue(all(e["prefix_identical"] for e in replans))

    def test_tracks_planned_path(self):
        self.assertLess(self.report.max_tracking_error, 1.0)
        log = pd.read_csv(os.path.join(self.out_dir, "mission_log.csv"))
        self.assertLess(float(log["tracking_err"].max()), 1.0)
        self.assertEqual(len(log), int(round(self.report.duration / 0.02)) + 1)
        np.testing.assert_allclose(log["clock"].diff().dropna(), 0.02, atol=1e-6)

    def test_empty_world_leaves_empty_map(self):
        self.assertEqual(_read_bytes(os.path.join(self.out_dir, "map.csv")), b"")
        self.assertEqual(self.report.min_clearance_world, float("inf"))

    def test_same_seed_gives_identical_outputs(self):
        second_dir = os.path.join(self.temp_dir, "second")
        run_mission(self.scenario, out_dir=second_dir)
        for name in ("mission_log.csv", "map.csv", "summary.json", "events.ndjson"):
            self.assertEqual(
                _read_bytes(os.path.join(self.out_dir, name)),
                _read_bytes(os.path.join(second_dir, name)),
                name,
            )


@pytest.mark.integration
class TestDirectMission(unittest.TestCase):
    def test_goal_sent_straight_to_controller(self):
        scenario = Scenario.model_validate(
            scenario_data(
                goals=[{"position": [3.0, 5.0, 2.5], "tolerance": 0.1}],
                mission={"mode": "direct", "max_duration": 20.0},
            )
        )
        report = run_mission(scenario)
        self.assertTrue(report.success, report.reason)
        self.assertEqual(report.metrics["plans"], 0)
        self.assertEqual(report.max_tracking_error, 0.0)


@pytest.mark.integration
class TestUnreachableGoal(unittest.TestCase):
    """A wall across the whole world leaves no path."""

    def test_recovery_budget_runs_out(self):
        report = run_mission(load_scenario(scenario_path("walled_off")))
        self.assertFalse(report.success)
        self.assertIn("recovery budget", report.reason)
        self.assertEqual(report.goals_reached, 0)
        self.assertGreaterEqual(report.metrics["plan_failures"], 2)
        self.assertLessEqual(report.duration, 2.0 + 1e-9)
        self.assertLess(report.distance_flown, 0.5)


@pytest.mark.integration
class TestScanReplay(unittest.TestCase):
    """Recorded scans rebuild the map the mission ended with."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.scenario = Scenario.model_validate(
            scenario_data(
                world={
                    "bounds": {"min": [0.0, 0.0, 0.0], "max": [10.0, 10.0, 5.0]},
                    "static": [{"min": [6.0, 1.0, 0.0], "max": [7.0, 9.0, 4.0]}],
                },
                goals=[{"position": [3.0, 5.0, 2.0]}],
                mission={"mode": "direct", "max_duration": 3.0},
            )
        )

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_replay_reproduces_final_map(self):
        report = run_mission(self.scenario, out_dir=self.temp_dir, record_scans=True)
        scans = read_scan_log(os.path.join(self.temp_dir, "scans.csv"))
        self.assertEqual(len(scans), report.metrics["scans"])
        self.assertEqual([s.scan_index for s in scans], list(range(len(scans))))

        grid = map_from_scans(self.scenario, scans)
        exported = _read_bytes(os.path.join(self.temp_dir, "map.csv")).decode("utf-8")
        self.assertNotEqual(exported, "")
        self.assertEqual(exported, "".join(line + "\n" for line in grid.export_lines()))

    def test_no_scan_log_unless_requested(self):
        run_mission(self.scenario, out_dir=self.temp_dir)
        self.assertFalse(os.path.exists(os.path.join(self.temp_dir, "scans.csv")))


if __name__ == "__main__":
    unittest.main()
