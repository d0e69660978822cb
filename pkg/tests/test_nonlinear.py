import numpy as np
import pytest

from conftest import smooth_solution
from periodic_fsi.beam import BeamParams
from periodic_fsi.coupled import coupled_system
from periodic_fsi.errors import BallViolation, DomainDegeneracy
from periodic_fsi.grid import Grid2D
from periodic_fsi.nonlinear import (TransformedSolution, evaluate_G, evaluate_nonlinear,
                                    evaluate_psi, evaluate_w, nonlinear_difference_norm,
                                    nonlinear_norm, physical_coordinates, solve_periodic_fsi,
                                    to_physical, to_transformed, transformed_residual, x_norm)
from periodic_fsi.periodic import single_frequency_forcing

NU = 0.1


@pytest.fixture(scope="module")
def tiny_system():
    return coupled_system(Grid2D(8, 4, 2.0), BeamParams())


def flat(X):
    return TransformedSolution(X.grid, X.period, X.u, X.p, 0 * X.eta, 0 * X.eta_t)


def test_zero_state_gives_zero_data(small_grid):
    ev = evaluate_nonlinear(TransformedSolution.zeros(small_grid, 1.0, 8), NU)
    for a in (ev.G, ev.w, ev.Theta, ev.Psi):
        assert np.abs(a).max() == 0


def test_flat_beam_reduces_to_convection(small_grid):
    X = flat(smooth_solution(small_grid, amp=0.1))
    assert np.abs(evaluate_w(X)).max() == 0
    assert np.abs(evaluate_psi(X, NU)).max() == 0
    # pressure and viscosity drop out; convection is quadratic in u
    G = evaluate_G(X, NU)
    Y = TransformedSolution(X.grid, X.period, X.u, 3 * X.p, X.eta, X.eta_t)
    assert np.allclose(evaluate_G(Y, 5 * NU), G, atol=1e-15)
    assert np.allclose(evaluate_G(X.scaled(2.0), NU), 4 * G, rtol=1e-12, atol=1e-15)


def test_data_vanish_quadratically(small_grid):
    base = smooth_solution(small_grid)
    sizes = [nonlinear_norm(evaluate_nonlinear(base.scaled(a), NU), small_grid)
             for a in (1e-2, 5e-3)]
    assert np.log2(sizes[0] / sizes[1]) == pytest.approx(2.0, abs=0.05)


def test_lipschitz_constant_shrinks_with_the_ball(small_grid):
    base = smooth_solution(small_grid)
    pert = smooth_solution(small_grid, period=1.0).scaled(1e-4)
    pert = TransformedSolution(small_grid, 1.0, pert.u[:, ::-1], pert.p, pert.eta[:, ::-1],
                               pert.eta_t[:, ::-1])
    consts = []
    for a in (2e-2, 1e-2):
        X = base.scaled(a)
        Y = TransformedSolution(small_grid, 1.0, X.u + pert.u, X.p + pert.p,
                                X.eta + pert.eta, X.eta_t + pert.eta_t)
        num = nonlinear_difference_norm(evaluate_nonlinear(X, NU), evaluate_nonlinear(Y, NU),
                                        small_grid)
        consts.append(num / x_norm(Y - X))
    assert np.isfinite(consts).all()
    assert consts[1] < consts[0]


def test_domain_degeneracy(small_grid):
    X = smooth_solution(small_grid, amp=3.0)
    with pytest.raises(DomainDegeneracy) as info:
        evaluate_w(X)
    assert info.value.failure_class == "domain-degeneracy"


# ----------------------------------------------------------------------
# change of variables
def test_flat_change_of_variables_is_identity(small_grid):
    f = lambda x, y: np.sin(x) * np.cos(3 * y)
    eta = np.zeros(small_grid.nx)
    vals = to_transformed(small_grid, f, eta)
    X, Z = small_grid.coordinates("center")
    assert np.array_equal(vals, f(X, Z))
    assert np.allclose(to_physical(small_grid, vals, eta, Z), vals, atol=1e-15)


def test_constant_deflection_round_trip_exact(small_grid):
    f = lambda x, y: np.exp(x) * y**2
    eta = np.full(small_grid.nx, 0.2)
    vals = to_transformed(small_grid, f, eta)
    _, Y = physical_coordinates(small_grid, eta, "center")
    assert np.allclose(to_physical(small_grid, vals, eta, Y), vals, rtol=1e-14)


def test_curved_deflection_round_trip_second_order():
    f = lambda x, y: np.sin(2 * x) * np.cos(np.pi * y)
    errs = []
    for n in (16, 32):
        g = Grid2D(2 * n, n, 2.0)
        eta = 0.1 * np.sin(np.pi * g.x_centers / g.length)
        vals = to_transformed(g, f, eta)
        X, Z = g.coordinates("center")
        back = to_physical(g, vals, eta, Z)
        errs.append(np.abs(back - f(X, Z)).max())
    assert errs[-1] <= 1e-3
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_vertical_scale_rejects_unknown_location(small_grid):
    with pytest.raises(ValueError):
        physical_coordinates(small_grid, np.zeros(small_grid.nx), "node")


# ----------------------------------------------------------------------
# Picard iteration
def test_zero_forcing_single_iteration(tiny_system):
    f = single_frequency_forcing(tiny_system.grid, 1.0, 0.0, 0.0)
    res = solve_periodic_fsi(tiny_system, f, 8)
    assert res.iterations == 1 and res.converged
    assert x_norm(res.solution, tiny_system.beam) == 0.0


def test_small_forcing_converges_and_satisfies_transformed_system(tiny_system):
    f = single_frequency_forcing(tiny_system.grid, 1.0, 1e-3, 1e-3)
    res = solve_periodic_fsi(tiny_system, f, 16, tol=1e-8)
    assert res.converged and "warning" not in res.diagnostics
    assert all(r < 0.9 for r in res.diagnostics["rates"])
    assert res.history[-1].r_margin > 0 and res.history[-1].mu_margin > 0
    rep = transformed_residual(tiny_system, f, res)
    assert max(rep.values()) <= 1e-7


def test_min_iter_is_honoured(tiny_system):
    f = single_frequency_forcing(tiny_system.grid, 1.0, 1e-3, 1e-3)
    res = solve_periodic_fsi(tiny_system, f, 8, tol=1e-2, min_iter=4)
    assert res.iterations == 4


def test_stagnation_reported_as_converged(tiny_system):
    f = single_frequency_forcing(tiny_system.grid, 1.0, 1e-3, 1e-3)
    res = solve_periodic_fsi(tiny_system, f, 8, tol=1e-30, max_iter=15)
    assert res.converged
    assert "warning" in res.diagnostics or res.history[-1].residual == 0.0


def test_large_forcing_violates_ball(tiny_system):
    f = single_frequency_forcing(tiny_system.grid, 1.0, 50.0, 50.0)
    with pytest.raises(BallViolation) as info:
        solve_periodic_fsi(tiny_system, f, 8)
    assert info.value.failure_class == "ball-violation"
