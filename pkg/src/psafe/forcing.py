"""Forcing functions for the safety-function Poisson problem.

Three constructions are provided, each negative on the free set:
Hölder distance forcing, constant average-flux forcing, and a softplus of
the divergence of a harmonic guidance field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .grid import DomainDecomposition, ScalarField, distance_field
from .solver import DirichletProblem, sor_solve

# strict negativity floor for softplus forcing
NEG_FLOOR = -1e-300


@dataclass(frozen=True)
class VectorField:
    x: ScalarField
    y: ScalarField

    def __post_init__(self):
        if not self.x.same_geometry(self.y):
            raise ShapeMismatchError("vector field components live on different grids")

    @property
    def resolution(self) -> float:
        return self.x.resolution

    def norm(self) -> np.ndarray:
        return np.hypot(self.x.values, self.y.values)


@dataclass(frozen=True)
class BoundaryFluxSpec:
    """Desired outward normal derivative on each obstacle boundary (all values < 0)."""

    default: float = -1.0
    overrides: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for value in (self.default, *self.overrides.values()):
            if not value < 0:
                raise ValueError(f"boundary flux must be negative, got {value}")

    def flux(self, obstacle: int) -> float:
        return self.overrides.get(int(obstacle), self.default)


def holder_forcing(dist: ScalarField, alpha: float, free: np.ndarray | None = None) -> ScalarField:
    """``-(dist / max dist) ** alpha`` on ``free`` cells (default: dist > 0), 0 elsewhere."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    d = dist.values
    free = d > 0 if free is None else np.asarray(free, dtype=bool)
    if np.any(d[free] < 0):
        raise ValueError("distance must be non-negative on the free set")
    dmax = d[free].max() if free.any() else 0.0
    if not dmax > 0:
        raise ValueError("distance field has no positive value on the free set")
    f = np.where(free, -((np.where(free, d, 0.0) / dmax) ** alpha), 0.0)
    return ScalarField.on(dist, f)


def average_flux_forcing(decomp: DomainDecomposition, b_bar: float) -> float:
    """Constant forcing giving mean outward boundary flux ``b_bar``."""
    if not b_bar < 0:
        raise ValueError(f"average flux must be negative, got {b_bar}")
    if decomp.free_area <= 0 or decomp.perimeter <= 0:
        raise ValueError("degenerate domain: zero free area or perimeter")
    return b_bar * decomp.perimeter / decomp.free_area


def guidance_boundary_values(decomp: DomainDecomposition, spec: BoundaryFluxSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet data ``b * n`` for each guidance component (zero off the boundary)."""
    bx = np.zeros(decomp.grid.shape)
    by = np.zeros(decomp.grid.shape)
    b = np.array([spec.flux(i) for i in decomp.boundary_obstacle])
    iy, ix = decomp.boundary_cells.T
    bx[iy, ix] = b * decomp.normals[:, 0]
    by[iy, ix] = b * decomp.normals[:, 1]
    return bx, by


def solve_guidance_field(decomp: DomainDecomposition, spec: BoundaryFluxSpec, tol: float = 1e-4,
                         max_iter: int | None = None, omega: float | None = None,
                         initial: VectorField | None = None, threads: int | None = None) -> VectorField:
    """Harmonic components with boundary values ``b * n`` on every obstacle boundary."""
    free = decomp.free_mask
    zeros = np.zeros(decomp.grid.shape)
    components = []
    for k, boundary in enumerate(guidance_boundary_values(decomp, spec)):
        guess = None
        if initial is not None:
            guess = (initial.x if k == 0 else initial.y).values
        problem = DirichletProblem(free, zeros, decomp.resolution, boundary, guess, decomp.grid.origin)
        components.append(sor_solve(problem, omega, tol, max_iter, threads)[0])
    return VectorField(*components)


def divergence(v: VectorField, domain: np.ndarray | None = None) -> ScalarField:
    """Central-difference divergence.

    Cells whose neighbour along an axis lies off the grid, or outside
    ``domain`` when given, use a one-sided difference along that axis.
    """
    dx = v.resolution
    return ScalarField.on(v.x, _diff(v.x.values, 1, dx, domain) + _diff(v.y.values, 0, dx, domain))


def _diff(a: np.ndarray, axis: int, dx: float, domain: np.ndarray | None) -> np.ndarray:
    inside = np.ones(a.shape, bool) if domain is None else np.asarray(domain, dtype=bool)
    a = np.moveaxis(a, axis, 0)
    inside = np.moveaxis(inside, axis, 0)
    out = np.zeros_like(a)
    # fwd/bwd: the next/previous cell along the axis exists and is inside the domain
    fwd = np.zeros(a.shape, bool)
    bwd = np.zeros(a.shape, bool)
    fwd[:-1] = inside[1:]
    bwd[1:] = inside[:-1]
    step = a[1:] - a[:-1]
    up = np.zeros_like(a)
    dn = np.zeros_like(a)
    up[:-1] = step
    dn[1:] = step
    both = fwd & bwd
    out[both] = (up[both] + dn[both]) / (2 * dx)
    only_f = fwd & ~bwd
    out[only_f] = up[only_f] / dx
    only_b = bwd & ~fwd
    out[only_b] = dn[only_b] / dx
    return np.moveaxis(out, 0, axis)


def softplus_forcing(div: ScalarField, beta: float = 1.0) -> ScalarField:
    """``-(1/beta) * log(1 + exp(-beta * div))``, floored at -1e-300 to stay strictly negative."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    f = -np.logaddexp(0.0, -beta * div.values) / beta
    return ScalarField.on(div, np.minimum(f, NEG_FLOOR))


@dataclass(frozen=True)
class ForcingConfig:
    """Forcing selection: ``holder``, ``avgflux`` or ``guidance``.

    ``bflux`` is the average flux for ``avgflux`` and the default boundary
    flux for ``guidance``; ``bflux_obs`` overrides it per obstacle.
    """

    method: str = "guidance"
    alpha: float = 0.1
    beta: float = 1.0
    bflux: float = -1.0
    bflux_obs: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("holder", "avgflux", "guidance"):
            raise ValueError(f"unknown forcing method {self.method!r}")


def make_forcing(decomp: DomainDecomposition, cfg: ForcingConfig, tol: float = 1e-4,
                 max_iter: int | None = None, guidance_guess: VectorField | None = None,
                 threads: int | None = None) -> tuple[ScalarField, VectorField | None]:
    """Forcing on the free set (0 elsewhere) and the guidance field if one was solved."""
    free = decomp.free_mask
    if cfg.method == "holder":
        dist = distance_field(decomp, "unsigned")
        return holder_forcing(dist, cfg.alpha, free), None
    if cfg.method == "avgflux":
        value = average_flux_forcing(decomp, cfg.bflux)
        return ScalarField.on(decomp.grid, np.where(free, value, 0.0)), None
    spec = BoundaryFluxSpec(cfg.bflux, dict(cfg.bflux_obs))
    v = solve_guidance_field(decomp, spec, tol, max_iter, initial=guidance_guess, threads=threads)
    div = divergence(v, free | decomp.boundary_mask)
    f = softplus_forcing(div, cfg.beta)
    return ScalarField.on(decomp.grid, np.where(free, f.values, 0.0)), v
