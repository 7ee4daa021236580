"""Stitched safety functions: assembly, continuous sampling and PDE checks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import PsafeError
from .forcing import VectorField
from .grid import DomainDecomposition, ScalarField
from .solver import DirichletProblem, SolveStats, sor_solve


@dataclass(frozen=True)
class Probe:
    position: np.ndarray
    h: float
    grad: np.ndarray
    hess: np.ndarray
    dh_dt: float = 0.0


@dataclass(eq=False)
class SafetyFrame:
    """Safety function on the whole grid with precomputed derivatives.

    ``stats`` holds the free-set and obstacle-interior solve statistics
    (both None for frames built from a given field, e.g. the SDF baseline).
    """

    h: ScalarField
    grad: VectorField
    hess: tuple[ScalarField, ScalarField, ScalarField]  # h_xx, h_yy, h_xy
    timestamp: float = 0.0
    dh_dt: ScalarField | None = None
    stats: tuple[SolveStats | None, SolveStats | None] = (None, None)

    @property
    def resolution(self) -> float:
        return self.h.resolution

    @cached_property
    def _axes(self):
        ny, nx = self.h.shape
        ox, oy = self.h.origin
        return ox + self.resolution * np.arange(nx), oy + self.resolution * np.arange(ny)

    @cached_property
    def _spline(self) -> RectBivariateSpline:
        xs, ys = self._axes
        return RectBivariateSpline(ys, xs, self.h.values, kx=3, ky=3, s=0)


def _second_differences(h: np.ndarray, dx: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.pad(h, 1, mode="edge")
    c = p[1:-1, 1:-1]
    hxx = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / dx**2
    hyy = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / dx**2
    hxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4 * dx**2)
    return hxx, hyy, hxy


def frame_from_field(h: ScalarField, t: float = 0.0, prev: SafetyFrame | None = None,
                     stats=(None, None)) -> SafetyFrame:
    """Wrap a grid field as a frame: central-difference derivatives and dh/dt against ``prev``."""
    dx = h.resolution
    gy, gx = np.gradient(h.values, dx)
    hess = tuple(ScalarField.on(h, a) for a in _second_differences(h.values, dx))
    dh_dt = None
    if prev is not None:
        if not t > prev.timestamp:
            raise ValueError(f"frame time {t} must exceed previous frame time {prev.timestamp}")
        if not h.same_geometry(prev.h):
            raise ValueError("previous frame lives on a different grid")
        dh_dt = ScalarField.on(h, (h.values - prev.h.values) / (t - prev.timestamp))
    grad = VectorField(ScalarField.on(h, gx), ScalarField.on(h, gy))
    return SafetyFrame(ScalarField.on(h, h.values), grad, hess, float(t), dh_dt, stats)


def assemble_frame(decomp: DomainDecomposition, f_free: ScalarField, f_obs: float | None = None,
                   tol: float = 1e-4, max_iter: int | None = None, omega: float | None = None,
                   prev: SafetyFrame | None = None, t: float = 0.0,
                   threads: int | None = None) -> SafetyFrame:
    """Solve on the free set and on the obstacle interiors and stitch the results.

    Both solves pin h = 0 on boundary cells. ``f_obs`` defaults to
    ``|mean(f_free)|`` over the free set. With ``prev`` both solves are
    warm-started from ``prev.h`` and dh/dt is the backward difference.
    """
    free = decomp.free_mask
    interior = decomp.interior_mask
    f = f_free.values
    if f.shape != decomp.grid.shape:
        raise ValueError("forcing does not match the grid")
    if not np.all(f[free] < 0):
        raise ValueError("free-space forcing must be strictly negative")
    if f_obs is None:
        f_obs = abs(float(f[free].mean()))
    if not f_obs > 0:
        raise ValueError(f"obstacle forcing must be positive, got {f_obs}")
    if prev is not None and not t > prev.timestamp:
        raise ValueError(f"frame time {t} must exceed previous frame time {prev.timestamp}")

    res = decomp.resolution
    origin = decomp.grid.origin
    guess = prev.h.values if prev is not None else None
    h_free, s_free = sor_solve(DirichletProblem(free, f, res, None, guess, origin), omega, tol, max_iter, threads)
    h_obs, s_obs = sor_solve(
        DirichletProblem(interior, np.where(interior, f_obs, 0.0), res, None, guess, origin),
        omega, tol, max_iter, threads,
    )
    h = np.zeros(decomp.grid.shape)
    h[free] = h_free.values[free]
    h[interior] = h_obs.values[interior]
    return frame_from_field(ScalarField.on(decomp.grid, h), t, prev, (s_free, s_obs))


def _fractional_index(frame: SafetyFrame, position) -> tuple[float, float]:
    ny, nx = frame.h.shape
    ox, oy = frame.h.origin
    fx = (position[0] - ox) / frame.resolution
    fy = (position[1] - oy) / frame.resolution
    eps = 1e-9
    if not (-eps <= fx <= nx - 1 + eps and -eps <= fy <= ny - 1 + eps):
        raise PsafeError(f"position {tuple(position)} lies outside the grid extent")
    return min(max(fx, 0.0), nx - 1.0), min(max(fy, 0.0), ny - 1.0)


def _bilinear(values: np.ndarray, fx: float, fy: float) -> float:
    ny, nx = values.shape
    ix = min(int(fx), nx - 2)
    iy = min(int(fy), ny - 2)
    tx, ty = fx - ix, fy - iy
    v = values[iy : iy + 2, ix : ix + 2]
    return float((1 - ty) * ((1 - tx) * v[0, 0] + tx * v[0, 1]) + ty * ((1 - tx) * v[1, 0] + tx * v[1, 1]))


def sample(frame: SafetyFrame, position, method: str = "bilinear") -> Probe:
    """Value, gradient, Hessian and dh/dt at a world position.

    ``bilinear`` interpolates each precomputed grid field independently.
    ``cubic`` evaluates an interpolating bicubic spline of h and its exact
    derivatives, so the returned gradient is the gradient of the returned
    value; dh/dt stays bilinear in both modes.
    """
    position = np.asarray(position, dtype=np.float64)
    fx, fy = _fractional_index(frame, position)
    dh_dt = _bilinear(frame.dh_dt.values, fx, fy) if frame.dh_dt is not None else 0.0
    if method == "bilinear":
        h = _bilinear(frame.h.values, fx, fy)
        grad = np.array([_bilinear(frame.grad.x.values, fx, fy), _bilinear(frame.grad.y.values, fx, fy)])
        hxx, hyy, hxy = (_bilinear(c.values, fx, fy) for c in frame.hess)
    elif method == "cubic":
        s = frame._spline
        x, y = position
        # spline axes are (y, x): dx= counts y-derivatives, dy= counts x-derivatives
        h = float(s.ev(y, x))
        grad = np.array([float(s.ev(y, x, dy=1)), float(s.ev(y, x, dx=1))])
        hxx = float(s.ev(y, x, dy=2))
        hyy = float(s.ev(y, x, dx=2))
        hxy = float(s.ev(y, x, dx=1, dy=1))
    else:
        raise ValueError(f"unknown interpolation method {method!r}")
    hess = np.array([[hxx, hxy], [hxy, hyy]])
    return Probe(position, h, grad, hess, dh_dt)


# --------------------------------------------------------------------------
# PDE checks


def boundary_face_differences(h: np.ndarray, decomp: DomainDecomposition) -> np.ndarray:
    """One-sided normal difference ``(h_b - h_free) / dx`` across every boundary face."""
    f = decomp.faces
    return (h[f[:, 0], f[:, 1]] - h[f[:, 2], f[:, 3]]) / decomp.resolution


def boundary_outward_derivative(h: np.ndarray, decomp: DomainDecomposition) -> np.ndarray:
    """Derivative of h along the outward normal at each boundary cell.

    A weighted mean of the cell's face differences, each face weighted by
    how well its direction (free cell to boundary cell) aligns with the
    normal; equal weights when no face aligns.
    """
    faces = decomp.faces
    diffs = boundary_face_differences(h, decomp)
    index = {tuple(c): k for k, c in enumerate(decomp.boundary_cells)}
    rows = np.array([index[(iy, ix)] for iy, ix in faces[:, :2]], dtype=np.int64)
    direction = np.column_stack([faces[:, 1] - faces[:, 3], faces[:, 0] - faces[:, 2]]).astype(float)
    w = np.maximum(np.einsum("ij,ij->i", direction, decomp.normals[rows]), 0.0)
    k = len(decomp.boundary_cells)
    wsum = np.bincount(rows, w, k)
    dsum = np.bincount(rows, w * diffs, k)
    count = np.bincount(rows, minlength=k)
    plain = np.bincount(rows, diffs, k) / np.maximum(count, 1)
    return np.where(wsum > 0, dsum / np.where(wsum > 0, wsum, 1.0), plain)


@dataclass(frozen=True)
class HopfReport:
    min_free_h: float
    max_obstacle_h: float | None  # None when no obstacle has interior cells
    max_boundary_outward_derivative: float


def check_positivity_and_hopf(frame: SafetyFrame, decomp: DomainDecomposition) -> HopfReport:
    h = frame.h.values
    interior = decomp.interior_mask
    return HopfReport(
        min_free_h=float(h[decomp.free_mask].min()),
        max_obstacle_h=float(h[interior].max()) if interior.any() else None,
        max_boundary_outward_derivative=float(boundary_outward_derivative(h, decomp).max()),
    )


def boundary_flux(h: np.ndarray, decomp: DomainDecomposition) -> float:
    """Outward flux of grad h through the boundary faces (face length dx)."""
    return float(boundary_face_differences(h, decomp).sum() * decomp.resolution)


def check_divergence(frame: SafetyFrame, decomp: DomainDecomposition, f_free: ScalarField) -> float:
    """Relative gap between the forcing integral and the boundary flux."""
    volume = float(f_free.values[decomp.free_mask].sum() * decomp.resolution**2)
    if volume == 0:
        raise ValueError("forcing integrates to zero over the free set")
    return abs(volume - boundary_flux(frame.h.values, decomp)) / abs(volume)


def dirichlet_energy(h: np.ndarray, f: np.ndarray, free: np.ndarray, dx: float) -> float:
    """``sum(0.5 |Dh|^2 + h f) dx^2`` with forward differences on every face touching the free set.

    The 5-point solution is the exact stationary point of this functional
    over fields that vanish off ``free``.
    """
    hm = np.where(free, h, 0.0)
    # faces along x and y with at least one free endpoint
    fx = free[:, 1:] | free[:, :-1]
    fy = free[1:, :] | free[:-1, :]
    gx = (hm[:, 1:] - hm[:, :-1]) / dx
    gy = (hm[1:, :] - hm[:-1, :]) / dx
    grad_term = 0.5 * (np.sum(gx[fx] ** 2) + np.sum(gy[fy] ** 2))
    return float((grad_term + np.sum((hm * f)[free])) * dx * dx)


def check_dirichlet_energy(frame: SafetyFrame, decomp: DomainDecomposition, f_free: ScalarField,
                           trials: int = 100, seed: int = 0, phis=None) -> float:
    """Smallest ``J[h + eps*phi] - J[h]`` over random perturbations vanishing off the free set.

    ``eps`` cycles through ``{1e-2, -1e-2, 1e-3, -1e-3} * max h``. Explicit
    perturbations may be passed as ``phis`` (they are masked to the free set).
    """
    free = decomp.free_mask
    dx = decomp.resolution
    h = frame.h.values
    f = f_free.values
    base = dirichlet_energy(h, f, free, dx)
    scale = float(np.max(np.abs(h[free]))) if free.any() else 1.0
    epsilons = np.array([1e-2, -1e-2, 1e-3, -1e-3]) * scale
    if phis is None:
        rng = np.random.default_rng(seed)
        phis = (rng.uniform(-1.0, 1.0, h.shape) for _ in range(trials))
    worst = np.inf
    for k, phi in enumerate(phis):
        phi = np.where(free, phi, 0.0)
        gap = dirichlet_energy(h + epsilons[k % 4] * phi, f, free, dx) - base
        worst = min(worst, gap)
    return float(worst)
