import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_fsi.grid import Grid2D, ScalarField, VectorField
from periodic_fsi.leray import (leray_project, np_flat, np_operator, project_flat,
                                solve_poisson_dirichlet)
from periodic_fsi.stokes import stream_basis

G = Grid2D(12, 8, 2.0)
seeds = st.integers(0, 2**31 - 1)


def random_field(seed, grid=G):
    rng = np.random.default_rng(seed)
    return VectorField(grid, rng.standard_normal(grid.shape("x-face")),
                       rng.standard_normal(grid.shape("z-face")))


def wnorm(v):
    return np.sqrt(np.sum(G.face_weights * v**2))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_projection_properties(seed):
    u = random_field(seed)
    dec = leray_project(u)
    pu = dec.projected.flat
    assert wnorm(leray_project(dec.projected).projected.flat - pu) <= 1e-12 * wnorm(pu)
    assert np.abs(G.div @ pu).max() <= 1e-11 * np.abs(u.flat).max() / G.dx
    assert np.all(pu[G.dirichlet_faces] == 0)
    inner = np.sum(G.face_weights * pu * (u.flat - pu))
    assert abs(inner) <= 1e-12 * wnorm(u.flat) ** 2
    assert np.allclose(pu + dec.gradient_part.flat, u.flat, rtol=0, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_projection_is_a_contraction(seed):
    u = random_field(seed)
    assert wnorm(leray_project(u).projected.flat) <= wnorm(u.flat) * (1 + 1e-12)


def test_gradients_are_annihilated():
    X, Z = G.coordinates("center")
    phi = (G.length - X) * np.cos(np.pi * Z) + X**2 * Z
    u = VectorField.from_flat(G, G.grad_mixed @ phi.ravel())
    assert np.abs(leray_project(u).projected.flat).max() <= 1e-12 * np.abs(u.flat).max()


def test_solenoidal_fields_are_fixed():
    C = stream_basis(G)
    psi = np.random.default_rng(3).standard_normal(C.shape[1])
    v = C @ psi
    assert np.abs(G.div @ v).max() < 1e-10
    out = leray_project(VectorField.from_flat(G, v)).projected.flat
    assert np.allclose(out, v, atol=1e-12 * np.abs(v).max())


def test_pressure_part_reproduces_complement():
    f = random_field(11)
    q = np_operator(f)
    comp = f.flat - leray_project(f).projected.flat
    F = G.free_faces
    assert np.allclose((G.grad_mixed @ q.flat)[F], comp[F], atol=1e-12)


def test_flat_variants_accept_columns():
    fs = np.column_stack([random_field(s).flat for s in range(3)])
    P = project_flat(G, fs)
    for k in range(3):
        ref = leray_project(VectorField.from_flat(G, fs[:, k])).projected.flat
        assert np.allclose(P[:, k], ref, atol=1e-12)
    assert np_flat(G, fs).shape == (G.n_cells, 3)


def test_dirichlet_poisson_manufactured():
    X, Z = G.coordinates("center")
    L = G.length
    exact = np.sin(np.pi * X / L) * np.sin(np.pi * Z)
    errs = []
    for n in (8, 16, 32):
        g = Grid2D(2 * n, n, L)
        X, Z = g.coordinates("center")
        ex = np.sin(np.pi * X / L) * np.sin(np.pi * Z)
        rhs = -((np.pi / L) ** 2 + np.pi**2) * ex
        sol = solve_poisson_dirichlet(ScalarField(g, rhs))
        errs.append(np.abs(sol.values - ex).max())
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_rejects_wrong_types():
    with pytest.raises(TypeError):
        leray_project(np.zeros(G.n_faces))
    with pytest.raises(TypeError):
        solve_poisson_dirichlet(ScalarField(G, np.zeros(G.shape("x-face")), "x-face"))
