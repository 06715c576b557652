"""
Obstacle Index Module

This module wraps a k-d tree over occupied voxel centers and answers the
nearest-obstacle queries used by the planner's obstacle cost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)


def _row_distances(centers: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = centers - q
    return np.sqrt((diff * diff).sum(axis=1))


class ObstacleIndex:
    """Immutable nearest-neighbour index over obstacle centers."""

    def __init__(self, centers):
        pts = np.array(centers, dtype=float).reshape(-1, 3)
        pts.setflags(write=False)
        self._centers = pts
        self._tree: Optional[cKDTree] = cKDTree(pts) if len(pts) else None

    def __len__(self) -> int:
        return len(self._centers)

    @property
    def centers(self) -> np.ndarray:
        return self._centers

    @property
    def is_empty(self) -> bool:
        return self._tree is None

    def nearest(self, q) -> Tuple[float, Optional[np.ndarray]]:
        """
        Nearest obstacle center to ``q``.

        Ties on distance are broken by the lexicographically smallest center.

        Args:
            q: Query point (3,)

        Returns:
            Tuple[float, Optional[np.ndarray]]: (distance, center), or (inf, None)
            for an empty index
        """
        if self._tree is None:
            return float("inf"), None
        query = np.asarray(q, dtype=float).reshape(3)
        d0, _ = self._tree.query(query)
        radius = d0 + 1e-9 * max(1.0, d0)
        candidates = np.asarray(self._tree.query_ball_point(query, radius), dtype=int)
        if candidates.size == 0:
            candidates = np.arange(len(self._centers))
        pts = self._centers[candidates]
        dists = _row_distances(pts, query)
        best = dists.min()
        tied = pts[dists == best]
        order = np.lexsort((tied[:, 2], tied[:, 1], tied[:, 0]))
        return float(best), tied[order[0]].copy()

    def distances(self, points) -> np.ndarray:
        """Vectorised nearest distances for an (N, 3) array of points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self._tree is None:
            return np.full(len(pts), np.inf)
        dists, _ = self._tree.query(pts)
        return np.asarray(dists, dtype=float)


def nearest_obstacle(index: ObstacleIndex, q) -> Tuple[float, Optional[np.ndarray]]:
    """Module-level alias of :meth:`ObstacleIndex.nearest`."""
    return index.nearest(q)


@dataclass(frozen=True, eq=False)
class MapSnapshot:
    """Frozen view of the map handed to the planner."""

    index: ObstacleIndex
    lower: np.ndarray
    upper: np.ndarray
    resolution: float
    scan_index: int = -1
    clock: float = 0.0

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def contains_point(self, point) -> bool:
        return bool(self.contains(point)[0])

    @classmethod
    def empty(cls, lower, upper, resolution: float = 0.25) -> "MapSnapshot":
        return cls(
            index=ObstacleIndex(np.empty((0, 3))),
            lower=np.asarray(lower, dtype=float),
            upper=np.asarray(upper, dtype=float),
            resolution=resolution,
        )
