"""Synthetic occupancy maps used by the tests and experiment scripts."""

from __future__ import annotations

import numpy as np

from .grid import OccupancyGrid


def _centers(n: int, res: float, origin=(0.0, 0.0)):
    c = np.arange(n) * res
    return np.meshgrid(origin[0] + c, origin[1] + c)


def empty_room(n: int = 120, res: float = 0.025) -> OccupancyGrid:
    return OccupancyGrid(np.zeros((n, n), bool), res)


def block_room(n: int = 120, res: float = 0.025, size: int = 4, corner=None) -> OccupancyGrid:
    """Empty room with a ``size`` x ``size`` occupied block (default: centered)."""
    cells = np.zeros((n, n), bool)
    iy, ix = corner if corner is not None else ((n - size) // 2, (n - size) // 2)
    cells[iy : iy + size, ix : ix + size] = True
    return OccupancyGrid(cells, res)


def disk_room(radius: float = 1.0, cells_per_radius: int = 60, margin: int = 2):
    """Disk of free cells tiling ``[-R, R]^2``; the disk center is a cell corner.

    Returns the grid and the world position of the disk center.
    """
    res = radius / cells_per_radius
    n = 2 * cells_per_radius + 2 * margin
    origin = (-(cells_per_radius + margin - 0.5) * res,) * 2
    x, y = _centers(n, res, origin)
    return OccupancyGrid(np.hypot(x, y) >= radius, res, origin), np.zeros(2)


def unit_square(cells: int = 128) -> OccupancyGrid:
    """Unit square whose boundary nodes are the map border ring."""
    return OccupancyGrid(np.zeros((cells + 1, cells + 1), bool), 1.0 / cells)


def multi_obstacle(n: int = 120, res: float = 0.025) -> OccupancyGrid:
    """3 m x 3 m room with a disk, two boxes and an L-shaped obstacle."""
    x, y = _centers(n, res)
    cells = np.hypot(x - 0.85, y - 2.15) < 0.32
    cells |= (np.abs(x - 2.1) < 0.35) & (np.abs(y - 2.2) < 0.2)
    cells |= (np.abs(x - 1.6) < 0.15) & (np.abs(y - 1.2) < 0.45)
    cells |= ((x > 0.45) & (x < 1.0) & (y > 0.45) & (y < 0.65)) | ((x > 0.45) & (x < 0.65) & (y > 0.45) & (y < 0.95))
    cells |= np.hypot(x - 2.4, y - 0.7) < 0.2
    return OccupancyGrid(cells, res)


def navigation_map(n: int = 120, res: float = 0.025) -> OccupancyGrid:
    """Room for the double-integrator runs: three obstacles between the start region and the goal."""
    x, y = _centers(n, res)
    cells = np.hypot(x - 1.5, y - 1.5) < 0.35
    cells |= (np.abs(x - 0.9) < 0.12) & (np.abs(y - 2.2) < 0.35)
    cells |= (np.abs(x - 2.2) < 0.3) & (np.abs(y - 0.8) < 0.12)
    return OccupancyGrid(cells, res)


def dynamic_map(n: int = 120, res: float = 0.025) -> OccupancyGrid:
    """Room with a static disk (obstacle 2 after labeling) and a box on the left (obstacle 3) meant to sweep across."""
    x, y = _centers(n, res)
    cells = (np.abs(x - 0.55) < 0.15) & (np.abs(y - 1.5) < 0.2)
    cells |= np.hypot(x - 2.3, y - 0.6) < 0.2
    return OccupancyGrid(cells, res)
