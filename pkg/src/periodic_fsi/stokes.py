"""Steady Stokes solves, boundary liftings and the pressure operators.

The mixed problem is

    lam u - nu Lap u + grad p = f,  div u = 0,
    u = omega on the inflow, u = g e2 on the top, u = 0 on the bottom,
    u2 = 0 and p = 0 on the outflow.

It is assembled as a symmetric saddle-point system over the free faces, with
the outflow pressure condition built into the mixed gradient.  A pure
Dirichlet variant (pressure fixed by a zero-mean constraint) serves the
reflection and flux-compensation constructions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyFailure
from .grid import Grid2D, ScalarField, VectorField
from .leray import mixed_poisson_solve, np_flat, project_flat
from .linalg import SparseSolver


# ----------------------------------------------------------------------
# boundary data containers
@dataclass
class InflowProfile:
    """Velocity prescribed on the inflow wall.

    ``normal`` is ``u1`` at the face centres ``z_j = (j+1/2) dz`` (length
    ``nz``); ``tangential`` is ``u2`` at the interior nodes ``z_j = j dz``,
    ``j = 1..nz-1`` (zero when omitted).
    """

    normal: np.ndarray
    tangential: np.ndarray | None = None

    @classmethod
    def from_function(cls, grid: Grid2D, f1, f2=None):
        zc = grid.z_centers
        zn = grid.z_nodes[1:-1]
        return cls(np.asarray(f1(zc), float) * np.ones_like(zc),
                   None if f2 is None else np.asarray(f2(zn), float) * np.ones_like(zn))

    def flux(self, grid: Grid2D) -> float:
        """Outward flux ``int omega . n`` over the inflow wall."""
        return float(-np.sum(self.normal) * grid.dz)

    def scaled(self, a):
        return InflowProfile(a * np.asarray(self.normal),
                             None if self.tangential is None else a * np.asarray(self.tangential))


def _as_inflow(grid, omega):
    if omega is None:
        return None
    if not isinstance(omega, InflowProfile):
        omega = InflowProfile(np.asarray(omega, dtype=float))
    if np.shape(omega.normal) != (grid.nz,):
        raise ValueError(f"inflow profile needs {grid.nz} values")
    if omega.tangential is not None and np.shape(omega.tangential) != (grid.nz - 1,):
        raise ValueError(f"inflow tangential profile needs {grid.nz - 1} values")
    return omega


def _as_beam(grid, g):
    if g is None:
        return None
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.nx,):
        raise ValueError(f"top datum needs {grid.nx} values, got {g.shape}")
    return g


# ----------------------------------------------------------------------
# saddle-point assembly
class _StokesSystem:
    """Factorized saddle-point matrix for one grid, ``lam``, ``nu`` and face split."""

    def __init__(self, grid: Grid2D, lam: float, nu: float, pure_dirichlet: bool):
        self.grid = grid
        self.lam = float(lam)
        self.nu = float(nu)
        self.pure_dirichlet = pure_dirichlet
        if pure_dirichlet:
            fixed = np.concatenate([grid.dirichlet_faces, grid.boundary_faces["outflow"]])
        else:
            fixed = grid.dirichlet_faces
        mask = np.zeros(grid.n_faces, dtype=bool)
        mask[fixed] = True
        self.fixed = np.flatnonzero(mask)
        self.free = np.flatnonzero(~mask)
        W = grid.face_weights
        self.M = (self.lam * sp.diags(W) + self.nu * grid.stiffness).tocsr()
        wc = grid.cell_weight
        DF = grid.div[:, self.free]
        MFF = self.M[self.free][:, self.free]
        blocks = [[MFF, -wc * DF.T], [-wc * DF, None]]
        if pure_dirichlet:
            ones = sp.csr_matrix(np.full((1, grid.n_cells), wc))
            blocks[0].append(None)
            blocks[1].append(ones.T)
            blocks.append([None, ones, None])
        K = sp.bmat(blocks, format="csc")
        self.solver = SparseSolver(K, name="stokes saddle point")
        probe = self.solver.solve(np.ones(K.shape[0]))
        if not np.all(np.isfinite(probe)) or np.linalg.norm(K @ probe - 1) > 1e-6 * np.sqrt(K.shape[0]):
            raise AssemblyFailure("singular Stokes saddle-point system",
                                  n_free=int(self.free.size))

    def solve(self, f_flat, fixed_values, tangential):
        g = self.grid
        nu = self.nu
        W = g.face_weights
        ub = np.zeros(g.n_faces)
        ub[self.fixed] = fixed_values[self.fixed]
        b = nu * g.tangential_load(**tangential)
        r_mom = (W * f_flat)[self.free] - (self.M @ ub)[self.free] + b[self.free]
        r_div = g.cell_weight * (g.div @ ub)
        rhs = np.concatenate([r_mom, r_div] + ([[0.0]] if self.pure_dirichlet else []))
        sol = self.solver.solve(rhs)
        u = ub.copy()
        nf = self.free.size
        u[self.free] = sol[:nf]
        p = sol[nf:nf + g.n_cells]
        return u, p

    def residuals(self, u, p, f_flat, tangential):
        g = self.grid
        W = g.face_weights
        mom = (self.M @ u - self.nu * g.tangential_load(**tangential)
               + W * (g.grad_mixed @ p) - W * f_flat)[self.free] / W[self.free]
        return {"momentum": float(np.sqrt(np.sum(W[self.free] * mom**2))),
                "divergence": float(np.sqrt(g.cell_weight * np.sum((g.div @ u) ** 2)))}


@lru_cache(maxsize=32)
def _system(grid: Grid2D, lam: float, nu: float, pure_dirichlet: bool) -> _StokesSystem:
    return _StokesSystem(grid, lam, nu, pure_dirichlet)


def _boundary_vector(grid, g=None, omega=None, outflow=None):
    ub = np.zeros(grid.n_faces)
    tang = {}
    if g is not None:
        ub[grid.boundary_faces["top"]] = g
    if omega is not None:
        ub[grid.boundary_faces["inflow"]] = omega.normal
        if omega.tangential is not None:
            tang["inflow"] = omega.tangential
    if outflow is not None:
        ub[grid.boundary_faces["outflow"]] = outflow
    return ub, tang


@dataclass
class StokesSolution:
    u: VectorField
    p: ScalarField
    residuals: dict = field(default_factory=dict)


def solve_stokes_mixed(lam: float, f: VectorField | None, g=None, omega=None,
                       nu: float = 0.1, grid: Grid2D | None = None) -> StokesSolution:
    """Mixed Stokes solve with data ``g`` on the top and ``omega`` on the inflow."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if grid is None:
        if f is None:
            raise ValueError("pass a grid when f is omitted")
        grid = f.grid
    f_flat = np.zeros(grid.n_faces) if f is None else f.flat
    g = _as_beam(grid, g)
    omega = _as_inflow(grid, omega)
    sysm = _system(grid, float(lam), float(nu), False)
    ub, tang = _boundary_vector(grid, g, omega)
    u, p = sysm.solve(f_flat, ub, tang)
    return StokesSolution(VectorField.from_flat(grid, u), ScalarField(grid, p),
                          sysm.residuals(u, p, f_flat, tang))


def solve_stokes_dirichlet(grid: Grid2D, nu: float, g=None, omega=None, outflow=None,
                           lam: float = 0.0, f: VectorField | None = None):
    """Stokes with the normal velocity prescribed on all four walls.

    Tangential wall velocity is zero except an optional inflow profile.  The
    pressure is normalized to zero mean.
    """
    f_flat = np.zeros(grid.n_faces) if f is None else f.flat
    sysm = _system(grid, float(lam), float(nu), True)
    ub, tang = _boundary_vector(grid, _as_beam(grid, g), _as_inflow(grid, omega), outflow)
    u, p = sysm.solve(f_flat, ub, tang)
    return VectorField.from_flat(grid, u), ScalarField(grid, p)


# ----------------------------------------------------------------------
# liftings
def doubled_grid(grid: Grid2D) -> Grid2D:
    return Grid2D(2 * grid.nx, grid.nz, 2 * grid.length)


@dataclass
class ReflectionLift:
    """Outcome of the reflection construction for a top datum."""

    u: VectorField
    p: ScalarField
    midline_u2: np.ndarray
    reflected_datum: np.ndarray


def reflection_lift(g, grid: Grid2D, nu: float = 0.1) -> ReflectionLift:
    """Odd reflection across ``x = L``, Dirichlet solve, symmetrize, restrict."""
    g = _as_beam(grid, g)
    nx, nz = grid.nx, grid.nz
    big = doubled_grid(grid)
    ghat = np.concatenate([g, -g[::-1]])
    v, q = solve_stokes_dirichlet(big, nu, g=ghat)
    # v_s(x, z) = diag(1, -1) v(2L - x, z); the pressure flips sign as well
    u1 = 0.5 * (v.u1 + v.u1[::-1, :])
    u2 = 0.5 * (v.u2 - v.u2[::-1, :])
    p = 0.5 * (q.values - q.values[::-1, :])
    midline = 0.5 * (u2[nx - 1, 1:-1] + u2[nx, 1:-1])
    u = VectorField(grid, u1[:nx + 1, :], u2[:nx, :])
    return ReflectionLift(u, ScalarField(grid, p[:nx, :]), midline, ghat)


def lift_gamma_s(g, grid: Grid2D, nu: float = 0.1):
    """``L(g) = (L1(g), L2(g))``: divergence-free velocity with trace ``g e2`` on the top."""
    r = reflection_lift(g, grid, nu)
    return r.u, r.p


def bump_profile(grid: Grid2D) -> np.ndarray:
    """Discrete ``x^4 (L - x)^4`` on the beam nodes, normalized to unit integral."""
    x = grid.x_centers
    phi = x**4 * (grid.length - x) ** 4
    return phi / (np.sum(phi) * grid.dx)


@dataclass
class InflowLift:
    """Pieces of the inflow lifting.

    ``compensator`` is the top datum cancelling the inflow flux,
    ``dirichlet_u`` the Dirichlet solve carrying both data, ``phi_u`` the
    divergence-free field with the top datum removed and ``u``/``p`` the final
    mixed-condition lifting.
    """

    u: VectorField
    p: ScalarField
    compensator: np.ndarray
    dirichlet_u: VectorField
    phi_u: VectorField


def inflow_lift(omega, grid: Grid2D, nu: float = 0.1) -> InflowLift:
    omega = _as_inflow(grid, omega)
    flux = omega.flux(grid)
    comp = np.zeros(grid.nx) if flux == 0.0 else -bump_profile(grid) * flux
    ud, _ = solve_stokes_dirichlet(grid, nu, g=comp, omega=omega)
    if flux == 0.0:
        phi_u = ud
    else:
        phi_u = ud - lift_gamma_s(comp, grid, nu)[0]
    # correct the viscous residual of phi_u so the pair solves the mixed problem
    sysm = _system(grid, 0.0, float(nu), False)
    tang = {"inflow": omega.tangential} if omega.tangential is not None else {}
    W = grid.face_weights
    res = (nu * (grid.stiffness @ phi_u.flat) - nu * grid.tangential_load(**tang)) / W
    uc, pc = sysm.solve(-res, np.zeros(grid.n_faces), {})
    u = VectorField.from_flat(grid, phi_u.flat + uc)
    return InflowLift(u, ScalarField(grid, pc), comp, ud, phi_u)


def lift_gamma_i(omega, grid: Grid2D, nu: float = 0.1):
    """``L_Gi(omega)``: velocity/pressure pair with inflow trace ``omega``."""
    r = inflow_lift(omega, grid, nu)
    return r.u, r.p


def lift_gamma_o(theta, grid: Grid2D) -> ScalarField:
    """Discrete harmonic extension of outflow data ``theta`` (zero flux on the walls)."""
    theta = np.asarray(theta, dtype=float) * np.ones(grid.nz)
    bg = grid.boundary_gradient("outflow", theta)
    return ScalarField(grid, mixed_poisson_solve(grid, -(grid.div @ bg)))


def gradient_with_outflow(p: ScalarField, theta) -> VectorField:
    """Mixed gradient of ``p`` whose outflow value is ``theta``."""
    g = p.grid
    return VectorField.from_flat(g, g.grad_mixed @ p.flat
                                 + g.boundary_gradient("outflow", np.asarray(theta) * np.ones(g.nz)))


# ----------------------------------------------------------------------
# pressure operators
def top_extension(grid: Grid2D, g):
    out = np.zeros(grid.n_faces)
    out[grid.boundary_faces["top"]] = g
    return out


def ns_flat(grid: Grid2D, g):
    """``N_s(g)`` as flat cell values: zero-outflow potential with flux ``g`` through the top."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        rhs = -(grid.div @ top_extension(grid, g))
    else:
        E = np.zeros((grid.n_faces, g.shape[1]))
        E[grid.boundary_faces["top"]] = g
        rhs = -(grid.div @ E)
    return mixed_poisson_solve(grid, rhs)


def ns_operator(g, grid: Grid2D) -> ScalarField:
    return ScalarField(grid, ns_flat(grid, _as_beam(grid, g)))


@lru_cache(maxsize=16)
def added_mass_matrix(grid: Grid2D) -> np.ndarray:
    """Dense ``M_a``: top-row values of ``N_s`` applied to beam data."""
    cols = ns_flat(grid, np.eye(grid.nx))
    return cols[grid.top_cells, :]


def laplacian_faces(grid: Grid2D, u, tangential=None):
    """Face Laplacian ``-W^{-1}(K u - b)`` with optional wall data."""
    b = 0.0 if not tangential else grid.tangential_load(**tangential)
    return -(grid.stiffness @ u - b) / (grid.face_weights if np.ndim(u) == 1
                                        else grid.face_weights[:, None])


class LiftOperators:
    """Dense columns of the top lifting and cached solve contexts for one grid."""

    def __init__(self, grid: Grid2D, nu: float):
        self.grid = grid
        self.nu = float(nu)
        n = grid.nx
        L1 = np.zeros((grid.n_faces, n))
        L2 = np.zeros((grid.n_cells, n))
        sysm = _system(grid, 0.0, self.nu, False)
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            ub, _ = _boundary_vector(grid, g=e)
            u, p = sysm.solve(np.zeros(grid.n_faces), ub, {})
            L1[:, k] = u
            L2[:, k] = p
        self.L1 = L1
        self.L2 = L2
        self.PL1 = project_flat(grid, L1)
        self.NS = ns_flat(grid, np.eye(n))
        self.Ma = self.NS[grid.top_cells, :]

    def nv(self, pv, eta_t=None):
        """``N_v`` on flat divergence-free ``pv``.

        With the top trace ``eta_t`` of the underlying field the viscous term
        is taken on ``pv - P L1(eta_t)`` (homogeneous wall data) and the top
        lifting pressure is added back; without it the wall closure of the
        face Laplacian is the homogeneous one.
        """
        g = self.grid
        if eta_t is None:
            return np_flat(g, self.nu * laplacian_faces(g, pv))
        w = pv - self.PL1 @ eta_t
        return np_flat(g, self.nu * laplacian_faces(g, w)) + self.L2 @ eta_t


@lru_cache(maxsize=8)
def lift_operators(grid: Grid2D, nu: float) -> LiftOperators:
    return LiftOperators(grid, nu)


def nv_operator(pv: VectorField, nu: float = 0.1, boundary_trace=None) -> ScalarField:
    """Pressure generated by the viscous term of a projected field."""
    g = pv.grid
    if boundary_trace is None:
        return ScalarField(g, np_flat(g, nu * laplacian_faces(g, pv.flat)))
    return ScalarField(g, lift_operators(g, nu).nv(pv.flat, np.asarray(boundary_trace)))


# ----------------------------------------------------------------------
# stream-function basis of the discrete divergence-free space
@lru_cache(maxsize=8)
def stream_basis(grid: Grid2D) -> sp.csr_matrix:
    """Columns span the fields with zero divergence and zero wall normal flux.

    The stream function lives on grid nodes, vanishes on the inflow, bottom
    and top walls and is free at ``i = 1..nx``, ``j = 1..nz-1``.
    """
    nx, nz = grid.nx, grid.nz
    I, J = np.meshgrid(np.arange(1, nx + 1), np.arange(1, nz), indexing="ij")
    col = ((I - 1) * (nz - 1) + (J - 1)).ravel()
    I = I.ravel()
    J = J.ravel()
    rows, cols, vals = [], [], []
    # u1(i, j) = (psi(i, j+1) - psi(i, j)) / dz; node (I, J) touches rows j = J-1 and J
    rows += [grid.u1_index(I, J - 1), grid.u1_index(I, J)]
    cols += [col, col]
    vals += [np.full(col.size, 1 / grid.dz), np.full(col.size, -1 / grid.dz)]
    # u2(i, j) = -(psi(i+1, j) - psi(i, j)) / dx; node (I, J) touches i = I-1 and I
    rows.append(grid.u2_index(I - 1, J))
    cols.append(col)
    vals.append(np.full(col.size, -1 / grid.dx))
    keep = I < nx
    rows.append(grid.u2_index(I[keep], J[keep]))
    cols.append(col[keep])
    vals.append(np.full(int(keep.sum()), 1 / grid.dx))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(grid.n_faces, nx * (nz - 1)))


# ----------------------------------------------------------------------
def stokes_projection_equivalence(lam: float, f: VectorField | None, g=None,
                                  nu: float = 0.1, grid: Grid2D | None = None) -> dict:
    """Compare the mixed saddle-point solve with the projected formulation.

    The projected velocity is found by a Galerkin solve on the stream-function
    basis; the pressure is then rebuilt as
    ``-lam N_s(g) + N_v(Pu) + N_p(f)``.
    """
    grid = grid if grid is not None else f.grid
    f_flat = np.zeros(grid.n_faces) if f is None else f.flat
    g = np.zeros(grid.nx) if g is None else _as_beam(grid, g)
    ref = solve_stokes_mixed(lam, None if f is None else f, g, nu=nu, grid=grid)
    ops = lift_operators(grid, nu)
    W = grid.face_weights
    C = stream_basis(grid)
    Ml = lam * sp.diags(W) + nu * grid.stiffness
    l1 = ops.L1 @ g
    A = (C.T @ Ml @ C).tocsc()
    rhs = C.T @ (W * (f_flat - lam * l1))
    w = SparseSolver(A, symmetric=True, name="projected stokes").solve(rhs)
    w = C @ w
    u = w + l1
    pu = project_flat(grid, u)
    p = (-lam * ns_flat(grid, g) + ops.nv(pu, g) + np_flat(grid, f_flat))
    du = np.sqrt(np.sum(W * (u - ref.u.flat) ** 2))
    nu_ref = np.sqrt(np.sum(W * ref.u.flat**2))
    dp = np.sqrt(np.sum((p - ref.p.flat) ** 2))
    np_ref = np.sqrt(np.sum(ref.p.flat**2))
    return {
        "velocity_abs": float(du),
        "velocity_rel": float(du / nu_ref) if nu_ref > 0 else float(du),
        "pressure_abs": float(dp),
        "pressure_rel": float(dp / np_ref) if np_ref > 0 else float(dp),
        "mixed": ref,
        "projected_u": VectorField.from_flat(grid, u),
        "projected_p": ScalarField(grid, p),
    }


# ----------------------------------------------------------------------
# manufactured solution
def manufactured_stokes(grid: Grid2D, lam: float = 1.0, nu: float = 0.1) -> dict:
    """Solve a problem with a known smooth solution and report the errors.

    The stream function is ``psi = a(x) b(z)`` with ``a = 2 + cos(pi x / L)``
    and ``b = z^2 (3 - 2 z)``; the pressure is ``(L - x) cos(pi z)``.  The
    velocity has no tangential part on any wall, meets the outflow conditions
    and carries the top datum ``g = (pi / L) sin(pi x / L)``.
    """
    L = grid.length
    k = np.pi / L
    a = lambda x: 2 + np.cos(k * x)
    a1 = lambda x: -k * np.sin(k * x)
    a2 = lambda x: -k**2 * np.cos(k * x)
    a3 = lambda x: k**3 * np.sin(k * x)
    b = lambda z: z**2 * (3 - 2 * z)
    b1 = lambda z: 6 * z - 6 * z**2
    b2 = lambda z: 6 - 12 * z
    b3 = lambda z: -12 + 0 * z
    u1 = lambda x, z: a(x) * b1(z)
    u2 = lambda x, z: -a1(x) * b(z)
    px = lambda x, z: -np.cos(np.pi * z)
    pz = lambda x, z: -(L - x) * np.pi * np.sin(np.pi * z)
    lap1 = lambda x, z: a2(x) * b1(z) + a(x) * b3(z)
    lap2 = lambda x, z: -a3(x) * b(z) - a1(x) * b2(z)
    f = VectorField.from_function(grid, lambda x, z: lam * u1(x, z) - nu * lap1(x, z) + px(x, z),
                                  lambda x, z: lam * u2(x, z) - nu * lap2(x, z) + pz(x, z))
    g = -a1(grid.x_centers)
    omega = InflowProfile.from_function(grid, lambda z: a(0.0) * b1(z))
    sol = solve_stokes_mixed(lam, f, g, omega, nu=nu, grid=grid)
    exact_u = VectorField.from_function(grid, u1, u2)
    exact_p = ScalarField.from_function(grid, lambda x, z: (L - x) * np.cos(np.pi * z))
    W = grid.face_weights
    eu = np.sqrt(np.sum(W * (sol.u.flat - exact_u.flat) ** 2))
    ep = np.sqrt(np.sum(grid.cell_weight * (sol.p.flat - exact_p.flat) ** 2))
    return {"velocity_error": float(eu), "pressure_error": float(ep),
            "residuals": sol.residuals, "solution": sol}


def manufactured_order(nx=16, nz=8, length=2.0, lam=1.0, nu=0.1) -> dict:
    """Errors on ``nx x nz`` and the doubled grid, with observed orders."""
    c = manufactured_stokes(Grid2D(nx, nz, length), lam, nu)
    f = manufactured_stokes(Grid2D(2 * nx, 2 * nz, length), lam, nu)
    return {
        "coarse": (c["velocity_error"], c["pressure_error"]),
        "fine": (f["velocity_error"], f["pressure_error"]),
        "velocity_order": float(np.log2(c["velocity_error"] / f["velocity_error"])),
        "pressure_order": float(np.log2(c["pressure_error"] / f["pressure_error"])),
        "residuals": f["residuals"],
    }
