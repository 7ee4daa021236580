"""Red-black SOR for the 5-point Poisson/Laplace Dirichlet problem.

Cells of one color only read cells of the other color, so a half-sweep
may be split across threads in any order and still be bit-identical to
the serial result. Cells outside the grid act as Dirichlet cells with
value 0.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError, ShapeMismatchError
from .grid import ScalarField

# grids smaller than this stay single-threaded under PSAFE_THREADS=0 (auto)
AUTO_THREAD_MIN_CELLS = 512 * 512


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    omega: float
    warm_started: bool
    wall_time: float


@dataclass
class DirichletProblem:
    """Solve ``lap(h) = forcing`` on ``mask``; every other cell is pinned to ``boundary``.

    ``boundary`` and ``initial`` default to zeros. All arrays share the grid shape.
    """

    mask: np.ndarray
    forcing: np.ndarray
    resolution: float
    boundary: np.ndarray | None = None
    initial: np.ndarray | None = None
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        shape = self.mask.shape
        self.forcing = np.asarray(self.forcing, dtype=np.float64)
        if self.forcing.shape != shape:
            raise ShapeMismatchError(f"forcing shape {self.forcing.shape} != mask shape {shape}")
        if not np.all(np.isfinite(self.forcing[self.mask])):
            raise ValueError("forcing must be finite on solved cells")
        if self.boundary is None:
            self.boundary = np.zeros(shape)
        self.boundary = np.asarray(self.boundary, dtype=np.float64)
        if self.boundary.shape != shape:
            raise ShapeMismatchError(f"boundary shape {self.boundary.shape} != mask shape {shape}")
        if self.initial is not None:
            self.initial = np.asarray(self.initial, dtype=np.float64)
            if self.initial.shape != shape:
                raise ShapeMismatchError(f"initial guess shape {self.initial.shape} != mask shape {shape}")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def start(self) -> np.ndarray:
        """Padded starting iterate: Dirichlet values off the mask, guess (or 0) on it."""
        h = np.zeros((self.shape[0] + 2, self.shape[1] + 2))
        inner = h[1:-1, 1:-1]
        inner[...] = self.boundary
        guess = self.initial if self.initial is not None else np.zeros(self.shape)
        np.copyto(inner, guess, where=self.mask)
        return h


def optimal_omega(n: int) -> float:
    """Classical optimal SOR factor for the 5-point Laplacian on an n x n grid."""
    if n < 3:
        raise ValueError(f"grid dimension must be >= 3, got {n}")
    omega = 2.0 / (1.0 + math.sin(math.pi / n))
    return min(max(omega, 1.0), math.nextafter(2.0, 0.0))


def default_threads() -> int:
    """Thread cap from PSAFE_THREADS (0 or unset = auto)."""
    try:
        return max(int(os.environ.get("PSAFE_THREADS", "0")), 0)
    except ValueError:
        return 0


def _neighbor_sum(h: np.ndarray, r0: int, r1: int) -> np.ndarray:
    # rows r0:r1 of the unpadded grid; fixed summation order (up, down, left, right)
    return h[r0:r1, 1:-1] + h[r0 + 2 : r1 + 2, 1:-1] + h[r0 + 1 : r1 + 1, :-2] + h[r0 + 1 : r1 + 1, 2:]


def half_sweep(h: np.ndarray, color_mask: np.ndarray, rhs: np.ndarray, omega: float,
               r0: int = 0, r1: int | None = None) -> None:
    """Relax the cells of one color in rows ``r0:r1`` of the padded iterate ``h`` in place.

    ``rhs`` is ``dx**2 * f`` on the unpadded grid.
    """
    if r1 is None:
        r1 = color_mask.shape[0]
    center = h[r0 + 1 : r1 + 1, 1:-1]
    gs = 0.25 * (_neighbor_sum(h, r0, r1) - rhs[r0:r1])
    np.copyto(center, center + omega * (gs - center), where=color_mask[r0:r1])


def half_sweep_cellwise(h: np.ndarray, color_mask: np.ndarray, rhs: np.ndarray, omega: float,
                        order=None) -> None:
    """Scalar reference for :func:`half_sweep` visiting cells in ``order``."""
    cells = np.argwhere(color_mask) if order is None else order
    for iy, ix in cells:
        py, px = iy + 1, ix + 1
        c = h[py, px]
        nb = h[py - 1, px] + h[py + 1, px] + h[py, px - 1] + h[py, px + 1]
        gs = 0.25 * (nb - rhs[iy, ix])
        h[py, px] = c + omega * (gs - c)


def _residual_padded(h: np.ndarray, mask: np.ndarray, forcing: np.ndarray, dx: float) -> float:
    if not mask.any():
        return 0.0
    lap = (_neighbor_sum(h, 0, mask.shape[0]) - 4.0 * h[1:-1, 1:-1]) / (dx * dx)
    return float(np.max(np.abs(lap - forcing)[mask]))


def residual(fld, problem: DirichletProblem) -> float:
    """Max over solved cells of ``|lap_d(h) - f|``."""
    values = fld.values if isinstance(fld, ScalarField) else np.asarray(fld, dtype=np.float64)
    if values.shape != problem.shape:
        raise ShapeMismatchError(f"field shape {values.shape} != problem shape {problem.shape}")
    h = np.pad(values, 1)
    return _residual_padded(h, problem.mask, problem.forcing, problem.resolution)


def sor_solve(problem: DirichletProblem, omega: float | None = None, tol: float = 1e-4,
              max_iter: int | None = None, threads: int | None = None) -> tuple[ScalarField, SolveStats]:
    """Red-black SOR until the max Laplacian residual drops to ``tol``.

    Defaults: ``omega = optimal_omega(max(nx, ny))``, ``max_iter = 50 * max(nx, ny)``.
    Raises NonConvergenceError when ``max_iter`` full iterations do not suffice.
    """
    ny, nx = problem.shape
    n = max(nx, ny)
    omega = optimal_omega(n) if omega is None else float(omega)
    if not 1.0 <= omega < 2.0:
        raise ValueError(f"omega must lie in [1, 2), got {omega}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    max_iter = 50 * n if max_iter is None else int(max_iter)

    t0 = time.perf_counter()
    mask = problem.mask
    dx = problem.resolution
    rhs = np.where(mask, dx * dx * problem.forcing, 0.0)
    parity = np.add.outer(np.arange(ny), np.arange(nx)) % 2
    colors = (mask & (parity == 0), mask & (parity == 1))
    h = problem.start()

    threads = default_threads() if threads is None else threads
    if threads == 0:
        threads = min(os.cpu_count() or 1, 8) if ny * nx >= AUTO_THREAD_MIN_CELLS else 1
    threads = max(1, min(threads, ny))
    bounds = np.linspace(0, ny, threads + 1).astype(int)
    blocks = list(zip(bounds[:-1], bounds[1:]))

    iterations = 0
    res = 0.0
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        if mask.any():
            while True:
                for color in colors:
                    if pool is None:
                        half_sweep(h, color, rhs, omega)
                    else:
                        # the join acts as the barrier between half-sweeps
                        list(pool.map(lambda b: half_sweep(h, color, rhs, omega, *b), blocks))
                iterations += 1
                res = _residual_padded(h, mask, problem.forcing, dx)
                if res <= tol:
                    break
                if iterations >= max_iter:
                    raise NonConvergenceError(res, iterations)
    finally:
        if pool is not None:
            pool.shutdown()

    stats = SolveStats(iterations, res, omega, problem.initial is not None, time.perf_counter() - t0)
    return ScalarField(h[1:-1, 1:-1], dx, problem.origin, stats), stats
