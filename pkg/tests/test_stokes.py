import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_fsi.grid import Grid2D, VectorField
from periodic_fsi.stokes import (InflowProfile, added_mass_matrix, bump_profile, inflow_lift,
                                 lift_gamma_o, lift_gamma_s, manufactured_order,
                                 manufactured_stokes, ns_operator, reflection_lift,
                                 solve_stokes_dirichlet, solve_stokes_mixed, stream_basis,
                                 stokes_projection_equivalence)

NU = 0.1


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return VectorField(grid, rng.standard_normal(grid.shape("x-face")),
                       rng.standard_normal(grid.shape("z-face")))


def test_manufactured_solution_second_order():
    rep = manufactured_order(16, 8, 2.0, 1.0, NU)
    assert rep["velocity_order"] >= 1.8
    assert rep["pressure_order"] >= 1.8


def test_manufactured_residuals_vanish(small_grid):
    res = manufactured_stokes(small_grid)["residuals"]
    assert res["momentum"] < 1e-9 and res["divergence"] < 1e-10


def test_negative_lambda_rejected(small_grid):
    with pytest.raises(ValueError):
        solve_stokes_mixed(-1.0, None, grid=small_grid)


def test_wrong_datum_lengths_rejected(small_grid):
    with pytest.raises(ValueError):
        solve_stokes_mixed(1.0, None, np.zeros(3), grid=small_grid)
    with pytest.raises(ValueError):
        solve_stokes_mixed(1.0, None, None, np.zeros(3), grid=small_grid)


def test_zero_data_gives_zero(small_grid):
    sol = solve_stokes_mixed(1.0, None, grid=small_grid)
    assert np.abs(sol.u.flat).max() == 0 and np.abs(sol.p.flat).max() == 0


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 50.0), st.integers(0, 2**31 - 1))
def test_projected_formulation_matches_mixed(lam, seed):
    grid = Grid2D(12, 6, 2.0)
    f = random_field(grid, seed)
    g = np.sin(np.pi * grid.x_centers / grid.length)
    eq = stokes_projection_equivalence(lam, f, g, nu=NU, grid=grid)
    assert eq["velocity_rel"] <= 1e-8
    assert eq["pressure_rel"] <= 1e-8


def test_reflection_lift_matches_mixed(small_grid):
    g = np.sin(np.pi * small_grid.x_centers / small_grid.length) ** 2
    lift = reflection_lift(g, small_grid, NU)
    ref = solve_stokes_mixed(0.0, None, g, nu=NU, grid=small_grid)
    assert rel(lift.u.flat, ref.u.flat) <= 1e-8
    assert np.abs(lift.midline_u2).max() <= 1e-12
    assert np.allclose(lift.u.normal_trace("top"), g)
    assert np.abs(small_grid.div @ lift.u.flat).max() <= 1e-10


def test_lift_gamma_s_is_linear(small_grid):
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, small_grid.nx))
    ua, _ = lift_gamma_s(a, small_grid, NU)
    ub, _ = lift_gamma_s(b, small_grid, NU)
    uab, _ = lift_gamma_s(2 * a - b, small_grid, NU)
    assert np.allclose(uab.flat, 2 * ua.flat - ub.flat, atol=1e-11)


def test_inflow_lift_matches_mixed_and_compensates_flux(small_grid):
    omega = InflowProfile.from_function(small_grid, lambda z: (z * (1 - z)) ** 2)
    il = inflow_lift(omega, small_grid, NU)
    ref = solve_stokes_mixed(0.0, None, None, omega, nu=NU, grid=small_grid)
    assert rel(il.u.flat, ref.u.flat) <= 1e-8
    grid = small_grid
    net = omega.flux(grid) + np.sum(il.compensator) * grid.dx
    assert abs(net) <= 1e-12
    assert np.abs(grid.div @ il.dirichlet_u.flat).max() <= 1e-10
    assert np.abs(il.phi_u.flat[grid.boundary_faces["top"]]).max() <= 1e-12


def test_inflow_flux_and_scaling(small_grid):
    omega = InflowProfile.from_function(small_grid, lambda z: 6 * z * (1 - z))
    # midpoint rule on a quadratic: -(1 + dz^2/2)
    assert omega.flux(small_grid) == pytest.approx(-(1 + small_grid.dz**2 / 2), rel=1e-12)
    assert omega.scaled(2.0).flux(small_grid) == pytest.approx(2 * omega.flux(small_grid))


def test_bump_has_unit_integral(small_grid):
    phi = bump_profile(small_grid)
    assert np.sum(phi) * small_grid.dx == pytest.approx(1.0)
    assert phi.min() >= 0


def test_dirichlet_solve_is_divergence_free(small_grid):
    g = np.cos(np.pi * small_grid.x_centers / small_grid.length)
    g -= g.mean()
    u, p = solve_stokes_dirichlet(small_grid, NU, g=g)
    assert np.abs(small_grid.div @ u.flat).max() <= 1e-10
    assert abs(p.flat.mean()) <= 1e-10


def test_lift_gamma_o_of_constant_is_constant(small_grid):
    ell = lift_gamma_o(0.7, small_grid)
    assert np.allclose(ell.flat, 0.7, atol=1e-12)


def test_added_mass_symmetric_positive(small_grid):
    Ma = added_mass_matrix(small_grid)
    assert np.abs(Ma - Ma.T).max() <= 1e-10 * np.abs(Ma).max()
    assert np.linalg.eigvalsh(0.5 * (Ma + Ma.T)).min() > 0


def test_ns_operator_top_values_match_added_mass(small_grid):
    g = np.random.default_rng(2).standard_normal(small_grid.nx)
    q = ns_operator(g, small_grid)
    assert np.allclose(q.flat[small_grid.top_cells], added_mass_matrix(small_grid) @ g)


def test_stream_basis_spans_divergence_free_space():
    grid = Grid2D(8, 4, 2.0)
    C = stream_basis(grid).toarray()
    assert np.abs(grid.div @ C).max() <= 1e-12
    assert np.abs(C[grid.dirichlet_faces]).max() == 0
    n_free = len(grid.free_faces)
    assert np.linalg.matrix_rank(C) == C.shape[1] == n_free - grid.n_cells
