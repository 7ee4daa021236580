import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MAP_BUILDERS
from psafe import maps
from psafe.errors import ShapeMismatchError
from psafe.forcing import (NEG_FLOOR, BoundaryFluxSpec, ForcingConfig, VectorField, average_flux_forcing,
                           divergence, guidance_boundary_values, holder_forcing, make_forcing, softplus_forcing,
                           solve_guidance_field)
from psafe.grid import OccupancyGrid, ScalarField, decompose_domain, distance_field
from psafe.solver import DirichletProblem, residual


def field(values, res=0.1):
    return ScalarField(np.asarray(values, dtype=float), res)


# --- Hoelder


def test_holder_at_max_is_minus_one():
    d = decompose_domain(maps.empty_room(21, 0.1))
    dist = distance_field(d)
    f = holder_forcing(dist, 0.1, d.free_mask)
    assert f.values[10, 10] == pytest.approx(-1.0)
    assert np.all(f.values[d.free_mask] < 0)
    assert np.all(f.values[~d.free_mask] == 0)


def test_holder_half_distance():
    f = holder_forcing(field([[0.0, 1.0, 2.0]]), 0.5)
    assert f.values[0, 1] == pytest.approx(-np.sqrt(0.5))


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3), st.floats(0.01, 0.99))
def test_holder_scale_invariant(c, alpha):
    d = np.random.default_rng(0).uniform(0, 2, (6, 6))
    d[0, 0] = 0.0
    a = holder_forcing(field(d), alpha).values
    b = holder_forcing(field(c * d), alpha).values
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5])
def test_holder_alpha_range(alpha):
    with pytest.raises(ValueError):
        holder_forcing(field([[0.0, 1.0]]), alpha)


# --- average flux


def test_average_flux_unit_square():
    d = decompose_domain(maps.empty_room(12, 0.1))  # 10 x 10 free cells = 1 m^2, 4 m of wall faces
    assert d.free_area == pytest.approx(1.0)
    assert d.perimeter == pytest.approx(4.0)
    assert average_flux_forcing(d, -1.0) == pytest.approx(-4.0)
    assert average_flux_forcing(d, -2.0) == 2 * average_flux_forcing(d, -1.0)


def test_average_flux_sign():
    with pytest.raises(ValueError):
        average_flux_forcing(decompose_domain(maps.empty_room(12, 0.1)), 0.0)


# --- guidance field


def ring_room():
    n, res = 61, 0.05
    c = (np.arange(n) - 30) * res
    x, y = np.meshgrid(c, c)
    r = np.hypot(x, y)
    return OccupancyGrid((r < 0.4) | (r > 1.4), res)


def test_guidance_boundary_is_minus_normal():
    d = decompose_domain(ring_room())
    v = solve_guidance_field(d, BoundaryFluxSpec(-1.0))
    iy, ix = d.boundary_cells.T
    vb = np.column_stack([v.x.values[iy, ix], v.y.values[iy, ix]])
    assert np.allclose(vb, -d.normals, atol=1e-15)
    assert np.allclose(np.linalg.norm(vb, axis=1), 1.0)


def test_guidance_symmetry_in_empty_room():
    n = 41
    d = decompose_domain(maps.empty_room(n, 0.05))
    v = solve_guidance_field(d, BoundaryFluxSpec(-1.0), tol=1e-8)
    vx, vy = v.x.values, v.y.values
    assert np.allclose(vx, -vx[:, ::-1], atol=1e-8)
    assert np.allclose(vy, -vy[::-1, :], atol=1e-8)


def test_guidance_overrides_exact():
    g = maps.multi_obstacle()
    d = decompose_domain(g)
    spec = BoundaryFluxSpec(-1.0, {2: -2.0})
    bx, by = guidance_boundary_values(d, spec)
    iy, ix = d.boundary_cells.T
    mag = np.hypot(bx[iy, ix], by[iy, ix])
    on2 = d.boundary_obstacle == 2
    assert on2.any()
    b = np.where(on2, -2.0, -1.0)
    assert np.array_equal(bx[iy, ix], b * d.normals[:, 0])
    assert np.array_equal(by[iy, ix], b * d.normals[:, 1])
    assert np.allclose(mag[on2], 2.0, rtol=1e-15)
    assert np.allclose(mag[~on2], 1.0, rtol=1e-15)
    v = solve_guidance_field(d, spec)
    assert np.array_equal(v.x.values[iy, ix], bx[iy, ix])


def test_guidance_harmonic_within_tol():
    d = decompose_domain(maps.multi_obstacle())
    tol = 1e-4
    v = solve_guidance_field(d, BoundaryFluxSpec(-1.0), tol=tol)
    zeros = np.zeros(d.grid.shape)
    for comp, bnd in zip((v.x, v.y), guidance_boundary_values(d, BoundaryFluxSpec(-1.0))):
        assert residual(comp, DirichletProblem(d.free_mask, zeros, d.resolution, bnd)) <= tol


def test_flux_spec_rejects_nonnegative():
    with pytest.raises(ValueError):
        BoundaryFluxSpec(-1.0, {3: 0.5})
    assert BoundaryFluxSpec(-1.0, {3: -4.0}).flux(3) == -4.0


# --- divergence


def grid_xy(n=9, res=0.25):
    c = np.arange(n) * res
    return np.meshgrid(c, c)


def test_divergence_linear_field_exact():
    x, y = grid_xy()
    v = VectorField(field(x, 0.25), field(y, 0.25))
    assert np.allclose(divergence(v).values, 2.0, atol=1e-12)


def test_divergence_rotation_is_zero():
    x, y = grid_xy()
    v = VectorField(field(-y, 0.25), field(x, 0.25))
    assert np.allclose(divergence(v).values, 0.0, atol=1e-12)


def test_divergence_domain_one_sided():
    x, y = grid_xy()
    dom = np.ones(x.shape, bool)
    dom[:, 5:] = False
    v = VectorField(field(x**2, 0.25), field(0 * y, 0.25))
    div = divergence(v, dom).values
    # last inside column uses the backward difference
    assert div[3, 4] == pytest.approx((x[3, 4] ** 2 - x[3, 3] ** 2) / 0.25)


def test_guidance_divergence_nonzero_off_center():
    g = maps.block_room(60, 0.05, size=8, corner=(14, 35))
    d = decompose_domain(g)
    v = solve_guidance_field(d, BoundaryFluxSpec(-1.0))
    div = divergence(v, d.free_mask | d.boundary_mask).values
    assert np.abs(div[d.free_mask]).max() > 10 * 1e-4


def test_vector_field_geometry_check():
    with pytest.raises(ShapeMismatchError):
        VectorField(field(np.zeros((3, 3))), field(np.zeros((3, 4))))


# --- softplus


def test_softplus_values():
    assert softplus_forcing(field([[0.0]]), 1.0).values[0, 0] == pytest.approx(-np.log(2))
    assert softplus_forcing(field([[-5.0]]), 10.0).values[0, 0] == pytest.approx(-5.0, abs=1e-6)
    tiny = softplus_forcing(field([[50.0]]), 1.0).values[0, 0]
    assert tiny < 0 and tiny == pytest.approx(-np.exp(-50), rel=1e-9)
    assert softplus_forcing(field([[1e6]]), 1.0).values[0, 0] == NEG_FLOOR


def test_softplus_monotone_random_pairs():
    rng = np.random.default_rng(7)
    a = rng.uniform(-50, 800, 10**6)
    b = rng.uniform(-50, 800, 10**6)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    flo = softplus_forcing(field(lo[None, :]), 1.0).values
    fhi = softplus_forcing(field(hi[None, :]), 1.0).values
    assert np.all(flo <= fhi)
    assert np.all(fhi < 0)


def test_softplus_beta_positive():
    with pytest.raises(ValueError):
        softplus_forcing(field([[0.0]]), 0.0)


# --- all constructions


@pytest.mark.parametrize("method", ["holder", "avgflux", "guidance"])
@pytest.mark.parametrize("name", ["empty", "block", "multi"])
def test_forcing_negative_on_free(method, name):
    d = decompose_domain(MAP_BUILDERS[name]())
    f, v = make_forcing(d, ForcingConfig(method))
    assert np.all(f.values[d.free_mask] < 0)
    assert np.all(f.values[~d.free_mask] == 0)
    assert (v is not None) == (method == "guidance")


def test_forcing_config_method():
    with pytest.raises(ValueError):
        ForcingConfig("magic")
