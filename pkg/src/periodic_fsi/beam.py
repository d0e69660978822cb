"""Clamped, damped Euler-Bernoulli beam on the top wall.

Beam nodes sit at the cell-centre abscissae ``x_k = (k + 1/2) h``.  The
clamped ends enter through an energy form.  Slopes are sampled at the walls
(where they vanish), at ``h/4`` and ``L - h/4`` (from the wall value 0 and the
end node) and at the interior vertices; curvatures are the differences of
neighbouring slopes, constant on the interval between them.  With ``D1``, ``D2``
those sampling matrices and ``W1``, ``W2`` the interval lengths

    -A = (alpha * D2^T W2 D2 + beta * D1^T W1 D1) / h,     S = -D1^T W1 D1 / h,

so ``h <-A eta, eta>`` is the quadrature of ``alpha eta_xx^2 + beta eta_x^2``.
``-A`` is symmetric positive definite, the damping shares the closure and the
discrete energy identity closes exactly.  Away from the two end cells the rows
reduce to the standard five-point stencil.

``second_difference`` is the pointwise nodal second difference with the clamped
cubic ghost ``eta_{-1} = 2 eta_0 - eta_1 / 9``; it serves pointwise evaluation
only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError


@dataclass(frozen=True)
class BeamParams:
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.5
    nu: float = 0.1

    def __post_init__(self):
        bad = []
        if not self.alpha > 0:
            bad.append(f"alpha must be > 0 (got {self.alpha})")
        if not self.beta >= 0:
            bad.append(f"beta must be >= 0 (got {self.beta})")
        if not self.gamma > 0:
            bad.append(f"gamma must be > 0 (got {self.gamma})")
        if not self.nu > 0:
            bad.append(f"nu must be > 0 (got {self.nu})")
        if bad:
            raise ConfigError(bad)


def second_difference(n: int, h: float) -> np.ndarray:
    """Nodal second difference with the clamped ghost closure at both ends."""
    if n < 3:
        raise ValueError("the beam needs at least 3 nodes")
    D = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1)
         + np.diag(np.ones(n - 1), -1))
    # ghost 2*eta_0 - eta_1/9 folded into the end rows
    D[0, 0] += 2.0
    D[0, 1] -= 1.0 / 9.0
    D[-1, -1] += 2.0
    D[-1, -2] -= 1.0 / 9.0
    return D / h**2


def first_difference(n: int, h: float) -> np.ndarray:
    """Differences between neighbouring nodes, shape ``(n-1, n)``."""
    D = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0
    return D / h


def slope_points(n: int, h: float) -> np.ndarray:
    """Abscissae of the sampled slopes, walls included."""
    inner = np.arange(1, n) * h
    return np.concatenate([[0.0, h / 4], inner, [n * h - h / 4, n * h]])


def slope_matrix(n: int, h: float):
    """Slopes at :func:`slope_points` without the two wall rows, and their weights.

    Returns ``(D1, W1)`` with ``D1`` of shape ``(n+1, n)``; the slope at ``h/4``
    is ``2 eta_0 / h`` and carries the interval ``[0, h/2]``.
    """
    if n < 3:
        raise ValueError("the beam needs at least 3 nodes")
    D = np.zeros((n + 1, n))
    D[0, 0] = 2.0 / h
    D[1:n] = first_difference(n, h)
    D[n, n - 1] = -2.0 / h
    W = np.full(n + 1, h)
    W[[0, -1]] = h / 2
    return D, W


def curvature_matrix(n: int, h: float):
    """Curvatures between consecutive slope points and the interval lengths.

    Returns ``(D2, W2)`` with ``D2`` of shape ``(n+2, n)``; ``W2`` sums to ``n h``.
    """
    D1, _ = slope_matrix(n, h)
    pts = slope_points(n, h)
    S = np.vstack([np.zeros(n), D1, np.zeros(n)])
    W = np.diff(pts)
    return (S[1:] - S[:-1]) / W[:, None], W


class BeamOperator:
    """Assembled beam matrices for ``n`` nodes on a beam of length ``length``."""

    def __init__(self, n: int, length: float, params: BeamParams):
        self.n = int(n)
        self.length = float(length)
        self.h = self.length / self.n
        self.params = params
        self.D1, self.W1 = slope_matrix(self.n, self.h)
        self.D2, self.W2 = curvature_matrix(self.n, self.h)

    @property
    def x(self):
        return (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def stiffness(self) -> np.ndarray:
        """``-A``: symmetric positive definite."""
        p = self.params
        K = (p.alpha * self.D2.T @ (self.W2[:, None] * self.D2)
             + p.beta * self.D1.T @ (self.W1[:, None] * self.D1)) / self.h
        return 0.5 * (K + K.T)

    @cached_property
    def A(self) -> np.ndarray:
        return -self.stiffness

    @cached_property
    def S(self) -> np.ndarray:
        """Damping second difference (negative semidefinite)."""
        S = -(self.D1.T @ (self.W1[:, None] * self.D1)) / self.h
        return 0.5 * (S + S.T)

    def apply_A(self, eta):
        return self.A @ self._check(eta)

    def apply_S(self, eta):
        return self.S @ self._check(eta)

    def _check(self, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.shape[0] != self.n:
            raise ValueError(f"beam field needs {self.n} nodes, got {eta.shape[0]}")
        return eta

    # pairings ----------------------------------------------------------
    def l2(self, a, b):
        return float(self.h * np.dot(a, b))

    def h2(self, a, b):
        """Energy pairing ``beta <a_x, b_x> + alpha <a_xx, b_xx>``."""
        return float(self.h * (self._check(a) @ self.stiffness @ self._check(b)))

    def h1_seminorm2(self, a):
        d = self.D1 @ self._check(a)
        return float(np.sum(self.W1 * d * d))

    # block generator -----------------------------------------------------
    def block(self) -> np.ndarray:
        """``[[0, I], [A, gamma S]]`` acting on ``(eta, eta_t)``."""
        n = self.n
        I = np.eye(n)
        return np.block([[np.zeros((n, n)), I],
                         [self.A, self.params.gamma * self.S]])

    def energy(self, eta, eta_t):
        """``|eta_t|^2 + <-A eta, eta>`` (twice the physical energy)."""
        return self.h2(eta, eta) + self.l2(eta_t, eta_t)

    def cn_step(self, eta, eta_t, dt, load=None):
        """One Crank-Nicolson step of the free beam; ``load`` is the midpoint force."""
        n = self.n
        B = self.block()
        I = np.eye(2 * n)
        y = np.concatenate([eta, eta_t])
        rhs = (I + 0.5 * dt * B) @ y
        if load is not None:
            rhs[n:] += dt * np.asarray(load)
        y1 = np.linalg.solve(I - 0.5 * dt * B, rhs)
        return y1[:n], y1[n:]


def apply_A_alpha_beta(eta, length: float, params: BeamParams):
    """``beta eta_xx - alpha eta_xxxx`` on the clamped beam."""
    eta = np.asarray(eta, dtype=float)
    return BeamOperator(eta.size, length, params).apply_A(eta)


def assemble_beam_block(n: int, length: float, params: BeamParams) -> np.ndarray:
    return BeamOperator(n, length, params).block()


def spectral_abscissa(matrix) -> float:
    return float(np.max(sla.eigvals(matrix).real))
