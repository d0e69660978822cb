import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings, strategies as st

from periodic_fsi.beam import (BeamOperator, BeamParams, apply_A_alpha_beta, assemble_beam_block,
                               curvature_matrix, second_difference, slope_matrix,
                               spectral_abscissa)
from periodic_fsi.errors import ConfigError

x = sym.symbols("x")


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(beta=-1.0), dict(gamma=0.0), dict(nu=-0.1)])
def test_params_validated(kw):
    with pytest.raises(ConfigError):
        BeamParams(**kw)


def test_ghost_is_the_clamped_cubic():
    h, a, b = sym.symbols("h a b")
    c = a * x**2 + b * x**3  # value and slope vanish at the wall
    e0, e1, g = c.subs(x, h / 2), c.subs(x, 3 * h / 2), c.subs(x, -h / 2)
    assert sym.simplify(g - (2 * e0 - e1 / 9)) == 0
    D = second_difference(8, 0.25)
    assert D[0, 0] == 0.0 and D[0, 1] == pytest.approx((8 / 9) / 0.25**2)


def test_slope_and_curvature_exact_for_clamped_quadratic():
    n, L = 10, 2.0
    h = L / n
    xs = (np.arange(n) + 0.5) * h
    # a x^2 near the left wall is clamped there; check the left-end rows only
    eta = 3.0 * xs**2
    D1, W1 = slope_matrix(n, h)
    D2, W2 = curvature_matrix(n, h)
    assert D1[0] @ eta == pytest.approx(6.0 * h / 4)
    assert np.allclose((D2 @ eta)[:n // 2], 6.0)
    assert W1.sum() == pytest.approx(L) and W2.sum() == pytest.approx(L)


def test_zero_maps_to_zero():
    assert np.all(apply_A_alpha_beta(np.zeros(16), 2.0, BeamParams()) == 0)


def test_pointwise_order_two_on_quartic():
    L, alpha, beta = 2.0, 1.3, 0.7
    eta = x**2 * (L - x) ** 2
    exact = sym.lambdify(x, beta * sym.diff(eta, x, 2) - alpha * sym.diff(eta, x, 4))
    f = sym.lambdify(x, eta)
    errs = []
    for n in (16, 32, 64):
        b = BeamOperator(n, L, BeamParams(alpha, beta))
        r = b.apply_A(f(b.x)) - exact(b.x)
        errs.append(np.abs(r[2:-2]).max())
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_energy_form_converges_to_exact():
    L, alpha, beta = 2.0, 1.0, 0.5
    eta = x**2 * (L - x) ** 2
    exact = float(sym.integrate(alpha * sym.diff(eta, x, 2) ** 2 + beta * sym.diff(eta, x) ** 2,
                                (x, 0, L)))
    f = sym.lambdify(x, eta)
    vals = []
    for n in (192, 384):
        b = BeamOperator(n, L, BeamParams(alpha, beta))
        v = f(b.x)
        vals.append(-b.l2(b.apply_A(v), v))
    order = np.log2(abs(vals[0] - exact) / abs(vals[1] - exact))
    richardson = (4 * vals[1] - vals[0]) / 3
    assert order > 1.8
    assert abs(richardson - exact) / exact <= 1e-6


def test_clamped_eigenvalues_converge_at_second_order():
    L = 2.0
    ref = (4.730040745 / L) ** 4
    errs = [abs(np.linalg.eigvalsh(BeamOperator(n, L, BeamParams()).stiffness)[0] / ref - 1)
            for n in (32, 64, 128)]
    assert errs[-1] < 1e-3
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 5.0), st.floats(0.0, 5.0))
def test_symmetry_and_definiteness(seed, alpha, beta):
    b = BeamOperator(24, 1.5, BeamParams(alpha, beta))
    rng = np.random.default_rng(seed)
    e, k = rng.standard_normal((2, 24))
    lhs, rhs = b.l2(b.apply_A(e), k), b.l2(e, b.apply_A(k))
    assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + abs(rhs) + 1e-300) * 10
    assert b.l2(b.apply_A(e), e) < 0
    assert b.l2(b.apply_S(e), e) <= 0


def test_block_structure():
    p = BeamParams(1.0, 0.3, 0.8)
    b = BeamOperator(12, 1.0, p)
    B = assemble_beam_block(12, 1.0, p)
    eta = np.random.default_rng(0).standard_normal(12)
    out = B @ np.concatenate([eta, np.zeros(12)])
    assert np.all(out[:12] == 0) and np.allclose(out[12:], b.apply_A(eta))


def test_block_spectrum_in_left_half_plane():
    B = assemble_beam_block(64, 1.0, BeamParams(1.0, 0.0, 1.0))
    assert spectral_abscissa(B) < 0


def test_abscissa_non_increasing_in_underdamped_gamma():
    gammas = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0]
    ab = [spectral_abscissa(assemble_beam_block(64, 1.0, BeamParams(1.0, 0.0, g))) for g in gammas]
    assert all(b <= a for a, b in zip(ab, ab[1:]))


def test_crank_nicolson_energy_identity():
    p = BeamParams(1.0, 0.2, 0.4)
    b = BeamOperator(32, 2.0, p)
    eta = np.sin(np.pi * b.x / 2.0) ** 2
    eta_t = np.zeros(32)
    dt = 1e-3
    for _ in range(20):
        e0 = b.energy(eta, eta_t)
        new_eta, new_t = b.cn_step(eta, eta_t, dt)
        mid = 0.5 * (eta_t + new_t)
        # d/dt energy = 2 gamma <S eta_t, eta_t>, exact at midpoints for Crank-Nicolson
        rate = 2 * p.gamma * b.l2(b.apply_S(mid), mid)
        assert b.energy(new_eta, new_t) - e0 == pytest.approx(dt * rate, abs=1e-12 * e0)
        eta, eta_t = new_eta, new_t
