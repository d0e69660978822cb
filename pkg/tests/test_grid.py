import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from periodic_fsi.grid import (Grid2D, ScalarField, VectorField, divergence, dump_field, gradient,
                               inner_product, laplacian, load_field, norm)

x, z = sym.symbols("x z")
floats = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def lambdify(expr):
    f = sym.lambdify((x, z), expr, "numpy")
    return lambda X, Z: f(X, Z) * np.ones_like(X)


def test_rejects_small_grids():
    with pytest.raises(ValueError):
        Grid2D(3, 8)
    with pytest.raises(ValueError):
        Grid2D(8, 8, length=0.0)


def test_sizes_and_weights():
    g = Grid2D(6, 4, 2.0)
    assert g.n_u1 == 7 * 4 and g.n_u2 == 6 * 5 and g.n_cells == 24
    assert g.face_weights.sum() == pytest.approx(2 * 2.0)
    assert g.node_weights.sum() == pytest.approx(2.0)
    assert len(g.dirichlet_faces) + len(g.free_faces) == g.n_faces
    assert set(g.boundary_faces["outflow"]) <= set(g.free_faces)


def test_divergence_matches_sympy_on_quadratics():
    g = Grid2D(8, 6, 1.5)
    u1, u2 = x**2 * z + 3 * z, x * z**2 - x
    v = VectorField.from_function(g, lambdify(u1), lambdify(u2))
    exact = ScalarField.from_function(g, lambdify(sym.diff(u1, x) + sym.diff(u2, z)))
    assert np.allclose(divergence(v).values, exact.values, atol=1e-12)


def test_gradient_extrapolate_exact_for_linear():
    g = Grid2D(8, 6, 2.0)
    p = ScalarField.from_function(g, lambda X, Z: 2 * X - 3 * Z + 1)
    v = gradient(p)
    assert np.allclose(v.u1, 2.0) and np.allclose(v.u2, -3.0)


def test_dirichlet_laplacian_second_order():
    L = 2.0
    pe = sym.sin(sym.pi * x / L) * sym.sin(2 * sym.pi * z)
    lap = sym.diff(pe, x, 2) + sym.diff(pe, z, 2)
    errs = []
    for n in (8, 16, 32):
        g = Grid2D(2 * n, n, L)
        p = ScalarField.from_function(g, lambdify(pe))
        ex = ScalarField.from_function(g, lambdify(lap))
        errs.append(norm(laplacian(p, "dirichlet") - ex))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert orders.min() > 1.8


def test_mixed_laplacian_is_div_grad():
    g = Grid2D(6, 5, 1.0)
    assert abs(g.lap_mixed - g.div @ g.grad_mixed).max() == 0
    assert np.linalg.eigvals(g.lap_mixed.toarray()).real.max() < 0


def test_stiffness_symmetric_positive_on_free_faces():
    g = Grid2D(6, 4, 2.0)
    K = g.stiffness.toarray()
    F = g.free_faces
    assert np.abs(K - K.T).max() == 0
    assert np.linalg.eigvalsh(K[np.ix_(F, F)]).min() > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gradient_is_minus_adjoint_of_divergence(seed):
    g = Grid2D(6, 5, 1.7)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.n_faces)
    u[g.dirichlet_faces] = 0.0
    p = rng.standard_normal(g.n_cells)
    lhs = np.dot(g.face_weights * (g.grad_mixed @ p), u)
    rhs = -g.cell_weight * np.dot(p, g.div @ u)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (5, 4), elements=floats), arrays(float, (5, 4), elements=floats), floats)
def test_inner_product_symmetric_and_linear(a, b, s):
    g = Grid2D(4, 4, 1.0)
    fa = ScalarField(g, a, "x-face")
    fb = ScalarField(g, b, "x-face")
    assert inner_product(fa, fb) == pytest.approx(inner_product(fb, fa), abs=1e-9)
    assert inner_product(fa * s, fb) == pytest.approx(s * inner_product(fa, fb), rel=1e-9, abs=1e-7)
    assert norm(fa) >= 0


def test_h1_pairing_of_constants_vanishes():
    g = Grid2D(5, 4, 1.0)
    c = ScalarField(g, np.full(g.shape("center"), 3.0))
    assert inner_product(c, c, "h1") == 0.0


def test_mismatched_grids_rejected():
    a = ScalarField(Grid2D(4, 4), np.zeros((4, 4)))
    b = ScalarField(Grid2D(5, 4), np.zeros((5, 4)))
    with pytest.raises(ValueError):
        inner_product(a, b)


@pytest.mark.parametrize("loc", ["center", "x-face", "z-face", "node", "beam"])
def test_dump_round_trip_is_exact(tmp_path, loc):
    g = Grid2D(5, 4, 2.0 / 3.0)
    vals = np.random.default_rng(0).standard_normal(g.shape(loc)) / 7
    f = ScalarField(g, vals, loc)
    path = tmp_path / f"{loc}.csv"
    dump_field(f, path)
    back = load_field(path)
    assert back.grid == g and back.location == loc
    assert np.array_equal(back.values, vals)


def test_outflow_normal_trace():
    g = Grid2D(4, 4, 1.0)
    v = VectorField.from_function(g, lambda X, Z: X + Z, lambda X, Z: 0 * X)
    assert np.allclose(v.normal_trace("outflow"), 1.0 + g.z_centers)
