#!/usr/bin/env python3
"""
Unit tests for the voxel map: ray traversal, scan integration, scan aging
and occupancy classification.
"""

import math
import os
import sys
import unittest

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from mav_nav.core.dynamics import Pose  # noqa: E402
from mav_nav.core.errors import ScanOrderError, VoxelIndexError  # noqa: E402
from mav_nav.core.mapping.voxel_grid import (  # noqa: E402
    VoxelGrid,
    expire_old_scans,
    integrate_scan,
    occupied_centers,
    raytrace_voxels,
)

GRID = 32
index_strategy = st.tuples(*[st.integers(min_value=0, max_value=GRID - 1)] * 3)


def _dense_oracle_ok(start, end, voxels, step=0.01) -> bool:
    """Every voxel center lies within sqrt(3)/2 (+eps) of the segment between the end centers."""
    a = np.asarray(start, dtype=float) + 0.5
    b = np.asarray(end, dtype=float) + 0.5
    length = float(np.linalg.norm(b - a))
    count = max(2, int(math.ceil(length / step)) + 1)
    samples = a + np.linspace(0.0, 1.0, count)[:, None] * (b - a)
    centers = np.asarray(voxels, dtype=float) + 0.5
    nearest = np.min(np.linalg.norm(centers[:, None, :] - samples[None, :, :], axis=2), axis=1)
    return bool(np.all(nearest <= math.sqrt(3) / 2 + step))


def _flat(grid: VoxelGrid, index) -> int:
    return int(np.ravel_multi_index(tuple(index), grid.shape))


@pytest.mark.unit
class TestRaytrace(unittest.TestCase):
    """Integer 3D traversal between voxel indices."""

    def test_degenerate_ray(self):
        self.assertEqual(raytrace_voxels((3, 4, 5), (3, 4, 5)), [(3, 4, 5)])

    def test_axis_aligned_ray(self):
        self.assertEqual(
            raytrace_voxels((0, 0, 0), (3, 0, 0)), [(0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0)]
        )

    def test_out_of_bounds_raises(self):
        with self.assertRaises(VoxelIndexError):
            raytrace_voxels((0, 0, 0), (GRID, 0, 0), shape=(GRID, GRID, GRID))
        with self.assertRaises(VoxelIndexError):
            raytrace_voxels((-1, 0, 0), (3, 0, 0), shape=(GRID, GRID, GRID))

    def test_random_rays_pass_dense_sampling_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            start = tuple(int(x) for x in rng.integers(0, GRID, 3))
            end = tuple(int(x) for x in rng.integers(0, GRID, 3))
            voxels = raytrace_voxels(start, end, shape=(GRID, GRID, GRID))
            self.assertEqual(voxels[0], start)
            self.assertEqual(voxels[-1], end)
            self.assertTrue(_dense_oracle_ok(start, end, voxels), f"{start} -> {end}")

    @settings(max_examples=200, deadline=None)
    @given(start=index_strategy, end=index_strategy)
    def test_consecutive_voxels_are_neighbours(self, start, end):
        voxels = np.asarray(raytrace_voxels(start, end, shape=(GRID, GRID, GRID)))
        if len(voxels) > 1:
            steps = np.abs(np.diff(voxels, axis=0))
            self.assertTrue(np.all(steps <= 1))
            self.assertTrue(np.all(steps.max(axis=1) == 1))
        self.assertEqual(len(voxels), int(np.abs(np.subtract(end, start)).max()) + 1)


@pytest.mark.unit
class TestScanIntegration(unittest.TestCase):
    """Hit and miss tallies from registered scans."""

    def setUp(self):
        self.grid = VoxelGrid.from_bounds((0, 0, 0), (4, 4, 4), resolution=0.25, scan_window=30)
        self.sensor = Pose((0.1, 0.1, 0.1))

    def test_empty_scan_only_logs(self):
        integrate_scan(self.grid, self.sensor, np.empty((0, 3)), 0)
        self.assertEqual(len(self.grid.scan_log), 1)
        self.assertEqual(int(self.grid.hit_count.sum()), 0)
        self.assertEqual(int(self.grid.miss_count.sum()), 0)

    def test_single_point_along_x(self):
        integrate_scan(self.grid, self.sensor, [[1.0, 0.0, 0.0]], 0)
        self.assertEqual(self.grid.hit_count[4, 0, 0], 1)
        for i in (1, 2, 3):
            self.assertEqual(self.grid.miss_count[i, 0, 0], 1)
        self.assertEqual(self.grid.miss_count[0, 0, 0], 0)
        self.assertEqual(int(self.grid.hit_count.sum()), 1)
        self.assertEqual(int(self.grid.miss_count.sum()), 3)

    def test_points_in_same_voxel_count_once(self):
        integrate_scan(self.grid, self.sensor, [[1.0, 0.0, 0.0], [1.05, 0.02, 0.01]], 0)
        self.assertEqual(self.grid.hit_count[4, 0, 0], 1)

    def test_endpoint_of_same_scan_is_not_a_miss(self):
        points = [[1.0, 0.0, 0.0], [0.5, 0.0, 0.0]]
        integrate_scan(self.grid, self.sensor, points, 0)
        self.assertEqual(self.grid.hit_count[2, 0, 0], 1)
        self.assertEqual(self.grid.miss_count[2, 0, 0], 0)

    def test_rotated_sensor_frame(self):
        quarter_turn = (0.0, 0.0, math.sin(math.pi / 4), math.cos(math.pi / 4))
        pose = Pose((0.1, 0.1, 0.1), quaternion=quarter_turn)
        integrate_scan(self.grid, pose, [[1.0, 0.0, 0.0]], 0)
        self.assertEqual(self.grid.hit_count[0, 4, 0], 1)

    def test_points_outside_grid_are_dropped(self):
        integrate_scan(self.grid, self.sensor, [[10.0, 0.0, 0.0]], 0)
        self.assertEqual(int(self.grid.hit_count.sum()), 0)

    def test_non_increasing_scan_index_raises(self):
        integrate_scan(self.grid, self.sensor, [[1.0, 0.0, 0.0]], 3)
        with self.assertRaises(ScanOrderError):
            integrate_scan(self.grid, self.sensor, [[1.0, 0.0, 0.0]], 3)
        with self.assertRaises(ScanOrderError):
            integrate_scan(self.grid, self.sensor, [[1.0, 0.0, 0.0]], 2)


@pytest.mark.unit
class TestScanAging(unittest.TestCase):
    """Contributions leave the map once they are N scans old."""

    def setUp(self):
        self.grid = VoxelGrid.from_bounds((0, 0, 0), (4, 4, 4), resolution=0.25, scan_window=30)
        self.sensor = Pose((0.1, 0.1, 0.1))
        self.point = [[1.0, 0.0, 0.0]]

    def test_fewer_than_window_scans_no_change(self):
        integrate_scan(self.grid, self.sensor, self.point, 0)
        before = self.grid.hit_count.copy()
        expire_old_scans(self.grid, 29)
        np.testing.assert_array_equal(self.grid.hit_count, before)

    def test_single_observation_expires_after_exactly_window(self):
        integrate_scan(self.grid, self.sensor, self.point, 0)
        for k in range(1, 30):
            integrate_scan(self.grid, self.sensor, np.empty((0, 3)), k)
            expire_old_scans(self.grid, k)
            self.assertEqual(len(occupied_centers(self.grid)), 1, f"cleared early at scan {k}")
        integrate_scan(self.grid, self.sensor, np.empty((0, 3)), 30)
        expire_old_scans(self.grid, 30)
        self.assertEqual(self.grid.hit_count[4, 0, 0], 0)
        self.assertEqual(len(occupied_centers(self.grid)), 0)

    def test_reobserved_voxel_keeps_one_hit(self):
        integrate_scan(self.grid, self.sensor, self.point, 0)
        for k in range(1, 30):
            integrate_scan(self.grid, self.sensor, np.empty((0, 3)), k)
        integrate_scan(self.grid, self.sensor, self.point, 30)
        expire_old_scans(self.grid, 30)
        self.assertEqual(self.grid.hit_count[4, 0, 0], 1)

    def test_log_consistency_after_mixed_sequence(self):
        rng = np.random.default_rng(5)
        for k in range(80):
            points = rng.uniform(-1.0, 3.5, size=(int(rng.integers(0, 20)), 3))
            integrate_scan(self.grid, self.sensor, points, k)
            if k % 3 == 0:
                expire_old_scans(self.grid, k)
        hits, misses = self.grid.recompute_tallies()
        np.testing.assert_array_equal(hits, self.grid.hit_count)
        np.testing.assert_array_equal(misses, self.grid.miss_count)
        self.assertTrue(np.all(self.grid.hit_count >= 0))
        self.assertTrue(np.all(self.grid.miss_count >= 0))


@pytest.mark.unit
class TestOccupancy(unittest.TestCase):
    def setUp(self):
        self.grid = VoxelGrid((1.0, 2.0, 3.0), (4, 4, 4), resolution=0.5)

    def test_empty_grid(self):
        self.assertEqual(occupied_centers(self.grid).shape, (0, 3))

    def test_center_formula(self):
        self.grid.hit_count[1, 2, 3] = 3
        np.testing.assert_allclose(occupied_centers(self.grid), [[1.75, 3.25, 4.75]])

    def test_more_misses_than_hits_is_free(self):
        self.grid.hit_count[1, 1, 1] = 1
        self.grid.miss_count[1, 1, 1] = 5
        self.assertEqual(len(occupied_centers(self.grid)), 0)

    def test_tie_rule(self):
        self.grid.hit_count[0, 0, 0] = 2
        self.grid.miss_count[0, 0, 0] = 2
        self.assertEqual(len(occupied_centers(self.grid)), 1)
        strict = VoxelGrid((0, 0, 0), (2, 2, 2), resolution=0.5, occupied_on_tie=False)
        strict.hit_count[0, 0, 0] = 2
        strict.miss_count[0, 0, 0] = 2
        self.assertEqual(len(occupied_centers(strict)), 0)

    def test_snapshot_and_export(self):
        self.grid.hit_count[0, 1, 2] = 1
        snapshot = self.grid.snapshot(clock=1.5)
        self.assertEqual(len(snapshot.index), 1)
        self.assertEqual(snapshot.clock, 1.5)
        np.testing.assert_allclose(snapshot.upper, [3.0, 4.0, 5.0])
        self.assertEqual(list(self.grid.export_lines()), ["0,1,2,1.250000,2.750000,4.250000"])
        # the snapshot is frozen against later map changes
        self.grid.hit_count[3, 3, 3] = 1
        self.assertEqual(len(snapshot.index), 1)

    def test_world_index_round_trip(self):
        idx = self.grid.world_to_index([[1.0, 2.0, 3.0], [2.74, 2.0, 4.99]])
        np.testing.assert_array_equal(idx, [[0, 0, 0], [3, 0, 3]])
        self.assertEqual(_flat(self.grid, (3, 0, 3)), 3 * 16 + 3)


if __name__ == "__main__":
    unittest.main()
