"""Discrete Leray projection for the mixed boundary setting.

The projector maps a face field onto fields that are divergence free with zero
normal component on the walls ``inflow``, ``bottom`` and ``top``; the outflow
stays free.  The complement consists of gradients of potentials vanishing on
the outflow.

On the MAC grid the normal component lives on the boundary faces, so the
Neumann data of the harmonic correction are read off directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Grid2D, ScalarField, VectorField
from .linalg import SparseSolver


@lru_cache(maxsize=16)
def _dirichlet_solver(grid: Grid2D) -> SparseSolver:
    return SparseSolver(grid.lap_dirichlet, symmetric=True, name="dirichlet poisson")


@lru_cache(maxsize=16)
def _mixed_solver(grid: Grid2D) -> SparseSolver:
    return SparseSolver(grid.lap_mixed, symmetric=True, name="mixed poisson")


def mixed_poisson_solve(grid: Grid2D, rhs):
    """Solve ``L_m x = rhs`` (zero on the outflow, zero flux on the walls)."""
    return _mixed_solver(grid).solve(rhs)


def solve_poisson_dirichlet(rhs: ScalarField) -> ScalarField:
    """Five-point Poisson solve with homogeneous Dirichlet data on every side."""
    if not isinstance(rhs, ScalarField) or rhs.location != "center":
        raise TypeError("rhs must be a cell-centred ScalarField")
    g = rhs.grid
    return ScalarField(g, _dirichlet_solver(g).solve(rhs.flat))


def _neumann_extension(grid, values):
    """Face vector that equals ``values`` on the wall faces and vanishes elsewhere."""
    out = np.zeros(grid.n_faces)
    idx = grid.dirichlet_faces
    out[idx] = values[idx]
    return out


def solve_harmonic_mixed(u: VectorField, p_u: ScalarField) -> ScalarField:
    """Harmonic ``q`` with ``dq/dn = (u - grad p_u).n`` on the walls, ``q = 0`` on the outflow."""
    g = u.grid
    g.check_same(p_u.grid)
    r = u.flat - g.grad_dirichlet @ p_u.flat
    rhs = -(g.div @ _neumann_extension(g, r))
    return ScalarField(g, mixed_poisson_solve(g, rhs))


@dataclass
class LerayDecomposition:
    """``u = Pu + grad(p_u) + grad(q_u)``.

    ``gradient_part`` holds ``u - Pu`` as a face field.  On the wall faces it
    carries the normal data of ``u`` (where a cell-centred gradient has no
    interior stencil), elsewhere it is the discrete gradient of ``p_u + q_u``.
    """

    u: VectorField
    projected: VectorField
    p_u: ScalarField
    q_u: ScalarField
    gradient_part: VectorField

    @property
    def potential(self) -> ScalarField:
        return self.p_u + self.q_u


def leray_project(u: VectorField) -> LerayDecomposition:
    if not isinstance(u, VectorField):
        raise TypeError("expected a face-staggered VectorField")
    g = u.grid
    p_u = solve_poisson_dirichlet(ScalarField(g, g.div @ u.flat))
    q_u = solve_harmonic_mixed(u, p_u)
    phi = p_u.flat + q_u.flat
    proj = u.flat - g.grad_mixed @ phi
    proj[g.dirichlet_faces] = 0.0
    grad_part = u.flat - proj
    return LerayDecomposition(u, VectorField.from_flat(g, proj), p_u, q_u,
                              VectorField.from_flat(g, grad_part))


def project_flat(grid: Grid2D, u):
    """Leray projection of flat face vectors (columns allowed) via one mixed solve."""
    u = np.array(u, dtype=float)
    p0 = u.copy()
    p0[grid.dirichlet_faces] = 0.0
    phi = mixed_poisson_solve(grid, grid.div @ p0)
    out = p0 - grid.grad_mixed @ phi
    return out


def np_flat(grid: Grid2D, f):
    """Potential of ``(I - P) f`` as a flat cell vector (columns allowed)."""
    f = np.array(f, dtype=float)
    f[grid.dirichlet_faces] = 0.0
    return mixed_poisson_solve(grid, grid.div @ f)


def np_operator(f: VectorField) -> ScalarField:
    """Pressure part ``N_p(f)``: the potential with ``(I - P) f = grad N_p(f)``."""
    if not isinstance(f, VectorField):
        raise TypeError("expected a face-staggered VectorField")
    return ScalarField(f.grid, np_flat(f.grid, f.flat))
