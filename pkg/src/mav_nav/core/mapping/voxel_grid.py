"""
Voxel Grid Module

This module handles the aged occupancy map: scans are binned into a dense
voxel array, endpoints count as hits, voxels traversed by the rays count
as misses, and every scan's contribution is logged so it can be subtracted
again once the scan falls out of the aging window.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from mav_nav.core.dynamics import Pose
from mav_nav.core.errors import ScanOrderError, VoxelIndexError
from mav_nav.core.mapping.obstacle_index import MapSnapshot, ObstacleIndex

logger = logging.getLogger(__name__)

VoxelIndex = Tuple[int, int, int]


def _check_in_bounds(index: np.ndarray, shape: Optional[Sequence[int]], label: str) -> None:
    if shape is None:
        return
    if np.any(index < 0) or np.any(index >= np.asarray(shape)):
        raise VoxelIndexError(f"{label} voxel {tuple(index.tolist())} outside grid {tuple(shape)}")


def _traverse(start: np.ndarray, delta: np.ndarray, n: np.ndarray, k: np.ndarray) -> np.ndarray:
    # Integer rounding of start + k/n * delta; exact for every step k in [0, n].
    n = np.maximum(n, 1)
    return start + (2 * k * delta + n) // (2 * n)


def raytrace_voxels(start, end, shape: Optional[Sequence[int]] = None) -> List[VoxelIndex]:
    """
    3D Bresenham traversal between two voxel indices, both inclusive.

    The dominant axis advances by one voxel per step; the other axes follow
    the rounded line, so consecutive voxels differ by at most one per axis.

    Args:
        start: Start voxel index
        end: End voxel index
        shape: Grid shape used for the bounds check (skipped when None)

    Returns:
        List[VoxelIndex]: Traversed voxels from start to end

    Raises:
        VoxelIndexError: If either index lies outside ``shape``
    """
    s = np.asarray(start, dtype=np.int64).reshape(3)
    e = np.asarray(end, dtype=np.int64).reshape(3)
    _check_in_bounds(s, shape, "start")
    _check_in_bounds(e, shape, "end")

    delta = e - s
    n = int(np.abs(delta).max())
    if n == 0:
        return [tuple(int(c) for c in s)]
    k = np.arange(n + 1, dtype=np.int64)[:, None]
    voxels = _traverse(s, delta, np.int64(n), k)
    return [tuple(int(c) for c in row) for row in voxels]


@dataclass(frozen=True)
class ScanRecord:
    """Per-scan contribution: flat voxel indices counted as hit and as miss."""

    scan_index: int
    hits: np.ndarray
    misses: np.ndarray


@dataclass(frozen=True, eq=False)
class RecordedScan:
    """A scan as delivered to the map: sensor pose, sensor-frame points and stamps."""

    scan_index: int
    clock: float
    pose: Pose
    points: np.ndarray


class VoxelGrid:
    """Dense hit/miss tallies with a per-scan contribution log."""

    def __init__(
        self,
        origin,
        shape: Sequence[int],
        resolution: float = 0.25,
        scan_window: int = 30,
        occupied_on_tie: bool = True,
    ):
        """
        Initialize the voxel grid.

        Args:
            origin: World position of the (0, 0, 0) voxel's lower corner
            shape: Voxel counts per axis
            resolution: Voxel edge length in meters
            scan_window: Number of scans a contribution survives (N)
            occupied_on_tie: Classify voxels with equal hit and miss counts as occupied
        """
        if resolution <= 0:
            raise ValueError(f"resolution must be positive, got {resolution}")
        if scan_window < 1:
            raise ValueError(f"scan window must be at least 1, got {scan_window}")
        self.origin = np.asarray(origin, dtype=float).reshape(3)
        self.shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in self.shape):
            raise ValueError(f"grid shape must be positive, got {self.shape}")
        self.resolution = float(resolution)
        self.scan_window = int(scan_window)
        self.occupied_on_tie = occupied_on_tie
        self.hit_count = np.zeros(self.shape, dtype=np.int64)
        self.miss_count = np.zeros(self.shape, dtype=np.int64)
        self.scan_log: Deque[ScanRecord] = deque()
        self.last_scan_index: Optional[int] = None

    @classmethod
    def from_bounds(
        cls,
        lower,
        upper,
        resolution: float = 0.25,
        scan_window: int = 30,
        occupied_on_tie: bool = True,
    ) -> "VoxelGrid":
        """Build a grid covering the axis-aligned box [lower, upper]."""
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        shape = np.maximum(np.ceil((hi - lo) / resolution - 1e-9).astype(int), 1)
        return cls(lo, shape, resolution, scan_window, occupied_on_tie)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.shape) * self.resolution

    def world_to_index(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.floor((pts - self.origin) / self.resolution).astype(np.int64)

    def index_to_center(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=float).reshape(-1, 3)
        return self.origin + (idx + 0.5) * self.resolution

    def in_bounds(self, indices) -> np.ndarray:
        idx = np.asarray(indices).reshape(-1, 3)
        return np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)

    def raytrace(self, start, end) -> List[VoxelIndex]:
        return raytrace_voxels(start, end, self.shape)

    def integrate_scan(self, sensor_pose: Pose, points, scan_index: int) -> "VoxelGrid":
        """
        Insert one registered scan.

        Endpoint voxels gain one hit per scan regardless of how many points
        fall into them; voxels strictly between the sensor voxel and an
        endpoint gain one miss per scan unless they are endpoints of this scan.

        Args:
            sensor_pose: Sensor pose in the map frame
            points: (N, 3) points in the sensor frame
            scan_index: Strictly increasing scan counter

        Returns:
            VoxelGrid: self, updated in place

        Raises:
            ScanOrderError: If ``scan_index`` does not increase
        """
        if self.last_scan_index is not None and scan_index <= self.last_scan_index:
            raise ScanOrderError(
                f"scan {scan_index} arrived after scan {self.last_scan_index}"
            )
        self.last_scan_index = int(scan_index)

        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        empty = np.empty(0, dtype=np.int64)
        if len(pts) == 0:
            self.scan_log.append(ScanRecord(int(scan_index), empty, empty))
            return self

        world = sensor_pose.rotation.apply(pts) + sensor_pose.position
        idx = self.world_to_index(world)
        idx = idx[self.in_bounds(idx)]
        if len(idx) == 0:
            self.scan_log.append(ScanRecord(int(scan_index), empty, empty))
            return self

        hits = np.unique(np.ravel_multi_index(idx.T, self.shape))
        endpoints = np.stack(np.unravel_index(hits, self.shape), axis=1).astype(np.int64)
        sensor = self.world_to_index(sensor_pose.position)[0]
        misses = self._traversed_misses(sensor, endpoints, hits)

        self.hit_count.flat[hits] += 1
        self.miss_count.flat[misses] += 1
        self.scan_log.append(ScanRecord(int(scan_index), hits, misses))
        logger.debug(
            f"Integrated scan {scan_index}: {len(pts)} points, "
            f"{len(hits)} hit voxels, {len(misses)} miss voxels"
        )
        return self

    def _traversed_misses(
        self, sensor: np.ndarray, endpoints: np.ndarray, hits: np.ndarray
    ) -> np.ndarray:
        delta = endpoints - sensor
        steps = np.abs(delta).max(axis=1)
        inner = np.maximum(steps - 1, 0)
        total = int(inner.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        ray = np.repeat(np.arange(len(endpoints)), inner)
        offsets = np.cumsum(inner) - inner
        k = (np.arange(total) - np.repeat(offsets, inner) + 1)[:, None]
        voxels = _traverse(sensor, delta[ray], steps[ray][:, None], k)
        voxels = voxels[self.in_bounds(voxels)]
        if len(voxels) == 0:
            return np.empty(0, dtype=np.int64)
        flat = np.unique(np.ravel_multi_index(voxels.T, self.shape))
        return np.setdiff1d(flat, hits, assume_unique=True)

    def expire_old_scans(self, current_scan_index: int) -> "VoxelGrid":
        """Subtract and drop every record with index <= current - N."""
        cutoff = current_scan_index - self.scan_window
        expired = 0
        while self.scan_log and self.scan_log[0].scan_index <= cutoff:
            record = self.scan_log.popleft()
            self.hit_count.flat[record.hits] -= 1
            self.miss_count.flat[record.misses] -= 1
            expired += 1
        if expired:
            np.maximum(self.hit_count, 0, out=self.hit_count)
            np.maximum(self.miss_count, 0, out=self.miss_count)
            logger.debug(f"Expired {expired} scan(s) at or before index {cutoff}")
        return self

    def recompute_tallies(self) -> Tuple[np.ndarray, np.ndarray]:
        """Rebuild hit and miss tallies from the surviving scan log."""
        hits = np.zeros(self.shape, dtype=np.int64)
        misses = np.zeros(self.shape, dtype=np.int64)
        for record in self.scan_log:
            hits.flat[record.hits] += 1
            misses.flat[record.misses] += 1
        return hits, misses

    def occupied_mask(self) -> np.ndarray:
        if self.occupied_on_tie:
            evidence = self.hit_count >= self.miss_count
        else:
            evidence = self.hit_count > self.miss_count
        return (self.hit_count >= 1) & evidence

    def occupied_indices(self) -> np.ndarray:
        flat = np.flatnonzero(self.occupied_mask())
        return np.stack(np.unravel_index(flat, self.shape), axis=1).astype(np.int64)

    def occupied_centers(self) -> np.ndarray:
        """Centers ``origin + (i + 0.5) * resolution`` of occupied voxels, by flat index."""
        return self.index_to_center(self.occupied_indices())

    def snapshot(self, clock: float = 0.0) -> MapSnapshot:
        return MapSnapshot(
            index=ObstacleIndex(self.occupied_centers()),
            lower=self.origin.copy(),
            upper=self.upper,
            resolution=self.resolution,
            scan_index=-1 if self.last_scan_index is None else self.last_scan_index,
            clock=clock,
        )

    def export_lines(self) -> Iterable[str]:
        """Map export rows ``ix,iy,iz,cx,cy,cz`` with 6-decimal centers."""
        indices = self.occupied_indices()
        centers = self.index_to_center(indices)
        for (ix, iy, iz), (cx, cy, cz) in zip(indices.tolist(), centers.tolist()):
            yield f"{ix},{iy},{iz},{cx:.6f},{cy:.6f},{cz:.6f}"


def integrate_scan(grid: VoxelGrid, sensor_pose: Pose, points, scan_index: int) -> VoxelGrid:
    return grid.integrate_scan(sensor_pose, points, scan_index)


def expire_old_scans(grid: VoxelGrid, current_scan_index: int) -> VoxelGrid:
    return grid.expire_old_scans(current_scan_index)


def occupied_centers(grid: VoxelGrid) -> np.ndarray:
    return grid.occupied_centers()
