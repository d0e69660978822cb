import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_fsi.beam import BeamParams
from periodic_fsi.coupled import CoupledState, coupled_system
from periodic_fsi.grid import Grid2D


def random_state(system, seed):
    return system.constrain(np.random.default_rng(seed).standard_normal(system.dim))


def test_dimensions(small_system):
    g = small_system.grid
    assert small_system.dim == len(g.free_faces) + 2 * g.nx
    vF, et, eta = small_system.split(np.arange(small_system.dim, dtype=float))
    assert vF.size == small_system.n_free and et.size == eta.size == g.nx


def test_constrain_gives_divergence_free_velocity(small_system):
    y = random_state(small_system, 0)
    v = small_system.velocity(y)
    assert np.abs(small_system.grid.div @ v).max() <= 1e-10 * np.abs(v).max()
    # idempotent
    assert np.allclose(small_system.constrain(y), y, atol=1e-10)


def test_state_round_trip(small_system):
    y = random_state(small_system, 1)
    back = small_system.from_state(small_system.to_state(y))
    assert np.linalg.norm(back - y) <= 1e-12 * np.linalg.norm(y)


def test_state_arithmetic(small_grid):
    a = CoupledState.zeros(small_grid)
    b = CoupledState(np.ones(small_grid.n_faces), np.ones(small_grid.nx), 2 * np.ones(small_grid.nx))
    c = (a + b) * 2.0 - b
    assert np.array_equal(c.eta_t, b.eta_t) and np.array_equal(c.pv, b.pv)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([1 / 16, 1 / 64]))
def test_crank_nicolson_energy_identity(seed, dt):
    # E(y1) - E(y0) = -2 dt D((y0 + y1) / 2)
    system = coupled_system(Grid2D(12, 6, 2.0), BeamParams())
    y0 = random_state(system, seed)
    y1 = system.step(y0, dt)
    lhs = system.energy(y1) - system.energy(y0)
    rhs = -2 * dt * system.dissipation(0.5 * (y0 + y1))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12 * system.energy(y0))
    assert lhs <= 0


def test_dissipation_nonnegative(small_system):
    for seed in range(4):
        assert small_system.dissipation(random_state(small_system, seed)) >= 0


def test_step_preserves_constraint(small_system):
    y = small_system.step(random_state(small_system, 2), 1 / 32)
    v = small_system.velocity(y)
    assert np.abs(small_system.grid.div @ v).max() <= 1e-9 * np.abs(v).max()


def test_step_rejects_bad_dt(small_system):
    with pytest.raises(ValueError):
        small_system.step(np.zeros(small_system.dim), 0.0)


def test_rightmost_eigenvalues_stable(small_system):
    eigs, sigma = small_system.rightmost_eigenvalues(10)
    re = [e["lambda"].real for e in eigs]
    assert max(re) < 0
    assert re == sorted(re, reverse=True)
    assert max(e["ritz_residual"] for e in eigs) <= 1e-8
    assert max(e["energy_residual"] for e in eigs) <= 1e-8
    assert sigma > 0


def test_reduced_mass_is_spd(small_system):
    M, J, Z = small_system.reduced_matrices
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0
    # J + J^T is negative semidefinite: the pencil dissipates energy
    assert np.linalg.eigvalsh(0.5 * (J + J.T)).max() <= 1e-10 * np.abs(J).max()


def test_added_mass_solve(small_system):
    b = np.random.default_rng(3).standard_normal(small_system.grid.nx)
    x = small_system.added_mass_solve(b)
    Ma = small_system.lifts.Ma
    assert np.allclose(x + 0.5 * (Ma + Ma.T) @ x, b)
