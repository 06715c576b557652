#!/usr/bin/env python3
"""
Unit tests for the waypoint tracker.
"""

import os
import sys
import unittest

import numpy as np
import pytest

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from mav_nav.core.dynamics import MotionPrimitive, PiecewiseTrajectory, State6  # noqa: E402
from mav_nav.core.tracking import (  # noqa: E402
    TrackerMode,
    point_to_polyline,
    retarget,
    start_tracking,
    tracker_update,
    waypoint_times,
)
from mav_nav.io.schema import TrackerConfig  # noqa: E402

CONFIG = TrackerConfig(t0=1.0, dt_sample=0.1, d_tracking=0.5, d_replan=1.0)


def _line(duration: float = 3.0, start_time: float = 0.0) -> PiecewiseTrajectory:
    """Constant 1 m/s flight along +x from the origin."""
    prim = MotionPrimitive(State6((0, 0, 0), (1, 0, 0)), (0, 0, 0), duration)
    return PiecewiseTrajectory(start_time, (prim,))


@pytest.mark.unit
class TestWaypointSampling(unittest.TestCase):
    def test_times_start_after_lead_and_end_at_trajectory_end(self):
        times = waypoint_times(_line(), CONFIG)
        self.assertEqual(len(times), 21)
        self.assertAlmostEqual(times[0], 1.0)
        self.assertAlmostEqual(times[1], 1.1)
        self.assertEqual(times[-1], 3.0)
        self.assertTrue(np.all(np.diff(times) > 0))

    def test_short_trajectory_yields_end_only(self):
        times = waypoint_times(_line(duration=0.5, start_time=2.0), CONFIG)
        np.testing.assert_allclose(times, [2.5])

    def test_empty_trajectory(self):
        empty = PiecewiseTrajectory(4.0, (), origin=State6((1, 2, 3), (0, 0, 0)))
        status = start_tracking(empty, CONFIG)
        self.assertEqual(len(status.waypoints), 1)
        np.testing.assert_allclose(status.waypoint, [1, 2, 3])
        self.assertTrue(status.is_last)

    def test_point_to_polyline(self):
        line = [[0, 0, 0], [2, 0, 0], [2, 2, 0]]
        self.assertAlmostEqual(point_to_polyline((1, 1, 0), line), 1.0)
        self.assertAlmostEqual(point_to_polyline((3, 3, 0), line), np.sqrt(2))
        self.assertAlmostEqual(point_to_polyline((0, 0, 2), [[0, 0, 0]]), 2.0)


@pytest.mark.unit
class TestTrackerUpdate(unittest.TestCase):
    """Waypoint advancement, waiting and path abandonment."""

    def setUp(self):
        self.status = start_tracking(_line(), CONFIG)

    def test_first_tick_emits_first_waypoint(self):
        status, waypoint = tracker_update(self.status, (5.0, 0.0, 0.0), CONFIG)
        np.testing.assert_allclose(waypoint, [1.0, 0.0, 0.0])
        self.assertEqual(status.index, 0)

    def test_advances_when_close(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        status, waypoint = tracker_update(self.status, (0.8, 0.0, 0.0), CONFIG)
        self.assertEqual(status.mode, TrackerMode.TRACKING)
        self.assertEqual(status.index, 1)
        np.testing.assert_allclose(waypoint, [1.1, 0.0, 0.0])

    def test_waits_when_lagging_on_path(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        status, waypoint = tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        self.assertEqual(status.mode, TrackerMode.WAITING)
        self.assertEqual(status.index, 0)
        np.testing.assert_allclose(waypoint, [1.0, 0.0, 0.0])

    def test_resumes_after_catching_up(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        status, waypoint = tracker_update(self.status, (0.7, 0.1, 0.0), CONFIG)
        self.assertEqual(status.mode, TrackerMode.TRACKING)
        self.assertEqual(status.index, 1)
        np.testing.assert_allclose(waypoint, [1.1, 0.0, 0.0])

    def test_aborts_off_path(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        status, waypoint = tracker_update(self.status, (1.0, 2.0, 0.0), CONFIG)
        self.assertEqual(status.mode, TrackerMode.ABORTED)
        self.assertIsNone(waypoint)
        _, again = tracker_update(self.status, (1.0, 0.0, 0.0), CONFIG)
        self.assertIsNone(again)

    def test_aborts_off_path_while_waiting(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        status, waypoint = tracker_update(self.status, (0.0, 1.5, 0.0), CONFIG)
        self.assertEqual(status.mode, TrackerMode.ABORTED)
        self.assertIsNone(waypoint)

    def test_holds_last_waypoint(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        self.status.index = len(self.status.waypoints) - 1
        status, waypoint = tracker_update(self.status, (3.0, 0.0, 0.0), CONFIG)
        self.assertTrue(status.is_last)
        np.testing.assert_allclose(waypoint, [3.0, 0.0, 0.0])

    def test_retarget_keeps_index(self):
        tracker_update(self.status, (0.0, 0.0, 0.0), CONFIG)
        for x in (0.9, 1.0, 1.1):
            tracker_update(self.status, (x, 0.0, 0.0), CONFIG)
        self.assertEqual(self.status.index, 3)
        status = retarget(self.status, _line(duration=1.2), CONFIG)
        self.assertEqual(status.index, 2)
        self.assertAlmostEqual(status.times[-1], 1.2)


if __name__ == "__main__":
    unittest.main()
