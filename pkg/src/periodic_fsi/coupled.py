"""Linear fluid-beam coupling: operator, energy, time stepping, spectrum.

Primitive unknowns are the fluid velocity on the free faces, the beam
velocity ``eta_t`` (which is also the normal velocity on the top faces), the
deflection ``eta`` and a pressure ``q`` acting as Lagrange multiplier for the
divergence constraint.  With beam mass ``m = dx`` per node the equations read

    W_F v_F'  = -nu (K v)_F + D_F^T W_c q + W_F F
    m eta_t'  = m A eta + m gamma S eta_t + m q_top - nu (K v)_top + m H
    eta'      = eta_t
    D_F v_F + D_top eta_t = 0

and conserve ``E = |v_F|_W^2 + m |eta_t|^2 + m <-A eta, eta>`` up to the viscous
and damping losses.  The projected state ``(Pv, eta, eta_t)`` is recovered
through the Leray projector; the velocity splits as
``v = Pv - P L1(eta_t) + L1(eta_t)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .beam import BeamOperator, BeamParams
from .errors import SolverFailure
from .grid import Grid2D, VectorField
from .leray import mixed_poisson_solve, np_flat, project_flat
from .linalg import SparseSolver
from .stokes import laplacian_faces, lift_operators, stream_basis


@dataclass
class CoupledState:
    """``(Pv, eta, eta_t)`` with ``Pv`` a flat face vector."""

    pv: np.ndarray
    eta: np.ndarray
    eta_t: np.ndarray

    def __add__(self, other):
        return CoupledState(self.pv + other.pv, self.eta + other.eta, self.eta_t + other.eta_t)

    def __sub__(self, other):
        return CoupledState(self.pv - other.pv, self.eta - other.eta, self.eta_t - other.eta_t)

    def __mul__(self, a):
        return CoupledState(a * self.pv, a * self.eta, a * self.eta_t)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid2D):
        return cls(np.zeros(grid.n_faces), np.zeros(grid.nx), np.zeros(grid.nx))


@dataclass
class EvolutionRHS:
    """Fluid body force ``F`` (flat faces) and beam load ``H`` at one instant."""

    F: np.ndarray
    H: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid2D):
        return cls(np.zeros(grid.n_faces), np.zeros(grid.nx))


class CoupledSystem:
    """Assembled coupled problem on one grid."""

    def __init__(self, grid: Grid2D, params: BeamParams):
        self.grid = grid
        self.params = params
        self.nu = params.nu
        self.beam = BeamOperator(grid.nx, grid.length, params)
        self.m = grid.dx
        self.lifts = lift_operators(grid, params.nu)
        self.free = grid.free_faces
        self.top = grid.boundary_faces["top"]
        self._factors = {}

    # ------------------------------------------------------------------
    # coordinates: y = (v_F, eta_t, eta)
    @property
    def n_free(self):
        return self.free.size

    @property
    def dim(self):
        return self.n_free + 2 * self.grid.nx

    def split(self, y):
        nf, nb = self.n_free, self.grid.nx
        return y[:nf], y[nf:nf + nb], y[nf + nb:]

    def velocity(self, y):
        """Full face velocity (top faces carry ``eta_t``, other walls zero)."""
        vF, et, _ = self.split(y)
        v = np.zeros(self.grid.n_faces)
        v[self.free] = vF
        v[self.top] = et
        return v

    def to_state(self, y) -> CoupledState:
        _, et, eta = self.split(y)
        return CoupledState(project_flat(self.grid, self.velocity(y)), eta.copy(), et.copy())

    def from_state(self, s: CoupledState):
        v = s.pv - self.lifts.PL1 @ s.eta_t + self.lifts.L1 @ s.eta_t
        return np.concatenate([v[self.free], s.eta_t, s.eta])

    def constrain(self, y):
        """Make the fluid part divergence free without touching ``eta_t``."""
        g = self.grid
        v = self.velocity(y)
        phi = mixed_poisson_solve(g, g.div @ v)
        v = v - g.grad_mixed @ phi
        _, et, eta = self.split(y)
        return np.concatenate([v[self.free], et, eta])

    # ------------------------------------------------------------------
    # energy
    def energy(self, y) -> float:
        vF, et, eta = self.split(y)
        W = self.grid.face_weights[self.free]
        return float(np.sum(W * vF**2) + self.m * et @ et
                     + self.m * eta @ self.beam.stiffness @ eta)

    def norm(self, y) -> float:
        return float(np.sqrt(max(self.energy(y), 0.0)))

    def state_inner(self, a: CoupledState, b: CoupledState) -> float:
        """``H`` pairing: ``<Pa, Pb>_W + m <(I + M_a) a_t, b_t> + m <-A a, b>``."""
        W = self.grid.face_weights
        Ma = self.lifts.Ma
        return float(np.sum(W * a.pv * b.pv)
                     + self.m * a.eta_t @ (b.eta_t + Ma @ b.eta_t)
                     + self.m * a.eta @ self.beam.stiffness @ b.eta)

    def dissipation(self, y) -> float:
        """``nu v.K v - gamma m <S eta_t, eta_t>`` (nonnegative)."""
        v = self.velocity(y)
        _, et, _ = self.split(y)
        return float(self.nu * v @ (self.grid.stiffness @ v)
                     - self.params.gamma * self.m * et @ self.beam.S @ et)

    # ------------------------------------------------------------------
    # operator on projected states
    @cached_property
    def added_mass_factor(self):
        n = self.grid.nx
        return sla.cho_factor(np.eye(n) + 0.5 * (self.lifts.Ma + self.lifts.Ma.T))

    def added_mass_solve(self, b):
        """Solve ``(I + M_a) x = b``."""
        return sla.cho_solve(self.added_mass_factor, np.asarray(b, dtype=float))

    def viscous_traction(self, v):
        """``nu (K v)_top / m``: the weak normal viscous stress on the beam."""
        return self.nu * (self.grid.stiffness @ v)[self.top] / self.m

    def apply_operator(self, s: CoupledState) -> CoupledState:
        g = self.grid
        w = s.pv - self.lifts.PL1 @ s.eta_t
        v = w + self.lifts.L1 @ s.eta_t
        row1 = project_flat(g, self.nu * laplacian_faces(g, w))
        nv = self.lifts.nv(s.pv, s.eta_t)
        load = (nv[g.top_cells] + self.beam.A @ s.eta
                + self.params.gamma * self.beam.S @ s.eta_t - self.viscous_traction(v))
        return CoupledState(row1, s.eta_t.copy(), self.added_mass_solve(load))

    def rhs_state(self, rhs: EvolutionRHS) -> CoupledState:
        """Projected forcing ``(P F, 0, (I + M_a)^{-1}(N_p(F)_top + H))``."""
        g = self.grid
        F = rhs.F.copy()
        F[g.dirichlet_faces] = 0.0
        npf = np_flat(g, F)
        return CoupledState(project_flat(g, F), np.zeros(g.nx),
                            self.added_mass_solve(npf[g.top_cells] + rhs.H))

    # ------------------------------------------------------------------
    # theta-scheme
    def _factor(self, dt, theta):
        key = (float(dt), float(theta))
        if key not in self._factors:
            self._factors[key] = self._assemble_step(dt, theta)
        return self._factors[key]

    @cached_property
    def _blocks(self):
        g = self.grid
        idx = np.concatenate([self.free, self.top])
        K = g.stiffness[idx][:, idx]
        nb = g.nx
        nf = self.n_free
        Kt = (self.nu * K).tolil()
        Kt[nf:, nf:] = Kt[nf:, nf:] - self.params.gamma * self.m * sp.csr_matrix(self.beam.S)
        Mv = sp.diags(np.concatenate([g.face_weights[self.free], np.full(nb, self.m)]))
        B = g.div[:, idx]
        E = sp.vstack([sp.csr_matrix((nf, nb)), sp.identity(nb)]).tocsr()
        mA = self.m * sp.csr_matrix(self.beam.A)
        return {"Kt": Kt.tocsr(), "Mv": Mv.tocsr(), "B": B.tocsr(), "E": E, "mA": mA}

    def _assemble_step(self, dt, theta):
        b = self._blocks
        wc = self.grid.cell_weight
        top_left = b["Mv"] / dt + theta * b["Kt"] - theta**2 * dt * (b["E"] @ b["mA"] @ b["E"].T)
        K = sp.bmat([[top_left, -wc * b["B"].T], [-wc * b["B"], None]], format="csc")
        return SparseSolver(K, name="coupled step")

    def step(self, y, dt, rhs0: EvolutionRHS | None = None, rhs1: EvolutionRHS | None = None,
             theta: float = 0.5, step_index: int | None = None):
        """One theta-scheme step in ``y`` coordinates; forcing at both time levels."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        b = self._blocks
        nf, nb = self.n_free, self.grid.nx
        V0 = y[:nf + nb]
        eta0 = y[nf + nb:]
        et0 = V0[nf:]
        rhs = (b["Mv"] @ V0) / dt - (1 - theta) * (b["Kt"] @ V0)
        rhs += b["E"] @ (b["mA"] @ (eta0 + theta * (1 - theta) * dt * et0))
        for weight, r in ((1 - theta, rhs0), (theta, rhs1)):
            if r is None or weight == 0:
                continue
            F = np.concatenate([r.F[self.free], r.H])
            rhs += weight * (b["Mv"] @ F)
        full = np.concatenate([rhs, np.zeros(self.grid.n_cells)])
        try:
            sol = self._factor(dt, theta).solve(full)
        except SolverFailure as exc:
            raise SolverFailure(f"coupled step failed at step {step_index}",
                                step=step_index, **exc.details) from exc
        V1 = sol[:nf + nb]
        et1 = V1[nf:]
        eta1 = eta0 + dt * (theta * et1 + (1 - theta) * et0)
        self.last_pressure = sol[nf + nb:]
        return np.concatenate([V1, eta1])

    def step_semigroup(self, s: CoupledState, dt, rhs0=None, rhs1=None, theta=0.5):
        """Step a projected state; returns the new state and the re-projection change."""
        y1 = self.step(self.from_state(s), dt, rhs0, rhs1, theta)
        s1 = self.to_state(y1)
        back = self.from_state(s1)
        change = np.linalg.norm(back - y1) / max(np.linalg.norm(y1), 1e-300)
        return s1, float(change)

    # ------------------------------------------------------------------
    # spectrum on the constrained space
    @cached_property
    def reduced_matrices(self):
        """``(M_r, J_r, Z)`` so that ``M_r x' = J_r x`` on constraint-satisfying states.

        ``x = (psi, eta_t, eta)``; the deflection equation is weighted by
        ``m (-A)`` so that ``M_r`` is the energy Gram matrix.
        """
        g = self.grid
        b = self._blocks
        C = stream_basis(g)
        nb = g.nx
        nf = self.n_free
        Zv = sp.hstack([sp.vstack([C[self.free], sp.csr_matrix((nb, C.shape[1]))]),
                        sp.vstack([sp.csr_matrix(self.lifts.L1[self.free]), sp.identity(nb)])]).tocsr()
        mA = b["mA"].toarray()
        nz_ = Zv.shape[1]
        M = np.zeros((nz_ + nb, nz_ + nb))
        J = np.zeros_like(M)
        ZMZ = (Zv.T @ b["Mv"] @ Zv).toarray()
        ZKZ = (Zv.T @ b["Kt"] @ Zv).toarray()
        ZE = (Zv.T @ b["E"]).toarray()
        M[:nz_, :nz_] = ZMZ
        M[nz_:, nz_:] = -mA
        J[:nz_, :nz_] = -ZKZ
        J[:nz_, nz_:] = ZE @ mA
        J[nz_:, :nz_] = -mA @ ZE.T
        M = 0.5 * (M + M.T)
        return M, J, Zv

    def eigen(self):
        """All eigenvalues and ``M``-orthonormal-ish eigenvectors of the reduced pencil."""
        M, J, _ = self.reduced_matrices
        Lc = np.linalg.cholesky(M)
        Li = sla.solve_triangular(Lc, np.eye(M.shape[0]), lower=True)
        Ah = Li @ J @ Li.T
        lam, X = sla.eig(Ah)
        vecs = Li.T @ X
        return lam, vecs, Ah

    def rightmost_eigenvalues(self, k=20):
        lam, vecs, Ah = self.eigen()
        order = np.argsort(-lam.real)[:k]
        M, J, _ = self.reduced_matrices
        out = []
        for i in order:
            x = vecs[:, i]
            l = lam[i]
            ritz = np.linalg.norm(J @ x - l * (M @ x)) / max(np.linalg.norm(M @ x) * abs(l), 1e-300)
            out.append({"lambda": complex(l), "vector": x, "ritz_residual": float(ritz),
                        "energy_residual": self.energy_identity_residual(l, x)})
        sigma_min = float(sla.svdvals(Ah).min())
        return out, sigma_min

    def energy_identity_residual(self, lam, x):
        """Relative residual of ``lam |u|^2 + conj(lam) <-A eta,eta> + nu |grad u|^2 + damping = 0``."""
        M, J, Zv = self.reduced_matrices
        nz_ = Zv.shape[1]
        nf, nb = self.n_free, self.grid.nx
        V = Zv @ x[:nz_]
        eta = x[nz_:]
        et = V[nf:]
        v = np.zeros(self.grid.n_faces, dtype=complex)
        v[self.free] = V[:nf]
        v[self.top] = et
        W = self.grid.face_weights[self.free]
        kin = np.sum(W * np.abs(V[:nf]) ** 2) + self.m * np.vdot(et, et).real
        pot = self.m * np.vdot(eta, self.beam.stiffness @ eta).real
        visc = self.nu * np.vdot(v, self.grid.stiffness @ v).real
        damp = -self.params.gamma * self.m * np.vdot(et, self.beam.S @ et).real
        total = lam * kin + np.conj(lam) * pot + visc + damp
        scale = abs(lam) * (kin + pot) + visc + damp
        return float(abs(total) / scale)


def coupled_system(grid: Grid2D, params: BeamParams) -> CoupledSystem:
    return CoupledSystem(grid, params)
