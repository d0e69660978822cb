"""Time-periodic solutions of the linear coupled problem.

A periodic orbit is a fixed point of the period map ``y -> S(T) y + b``, where
``b`` is the response of the zero state to one period of forcing.  The fixed
point solves ``(I - S(T)) y = b``; ``S(T)`` is applied matrix-free by marching
one period of the theta-scheme, and the linear system is handed to GMRES.

Propagators share a small interface (``dim``, ``period``, ``n_steps``,
``propagate``, ``norm``, ``constrain``) so the same driver serves the coupled
problem and the finite-dimensional surrogates used for checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .coupled import CoupledState, CoupledSystem, EvolutionRHS
from .errors import PeriodicityDefect, SolverFailure
from .grid import Grid2D, ScalarField
from .leray import np_flat
from .stokes import (InflowProfile, gradient_with_outflow, laplacian_faces,
                     lift_gamma_i, lift_gamma_o, ns_flat)


# ----------------------------------------------------------------------
# forcing
@dataclass
class FourierSeries:
    """``mean + sum_k cos_k cos(2 pi k t / T) + sin_k sin(2 pi k t / T)``."""

    period: float
    mean: float = 0.0
    cos: tuple = ()
    sin: tuple = ()

    def __call__(self, t):
        w = 2 * np.pi / self.period
        out = self.mean + 0.0 * np.asarray(t, dtype=float)
        for k, a in enumerate(self.cos, start=1):
            out = out + a * np.cos(k * w * t)
        for k, b in enumerate(self.sin, start=1):
            out = out + b * np.sin(k * w * t)
        return out

    def derivative(self, t):
        w = 2 * np.pi / self.period
        out = 0.0 * np.asarray(t, dtype=float)
        for k, a in enumerate(self.cos, start=1):
            out = out - a * k * w * np.sin(k * w * t)
        for k, b in enumerate(self.sin, start=1):
            out = out + b * k * w * np.cos(k * w * t)
        return out

    def scaled(self, a):
        return FourierSeries(self.period, a * self.mean,
                             tuple(a * c for c in self.cos), tuple(a * s for s in self.sin))

    @property
    def is_zero(self):
        return self.mean == 0 and not any(self.cos) and not any(self.sin)


@dataclass
class PeriodicForcing:
    """Periodic data of the linear problem.

    ``omega1`` (inflow velocity) and ``omega2`` (outflow pressure) are
    separable: a spatial profile times a Fourier series in time.  The optional
    ``f`` (faces), ``w`` (faces), ``theta`` (outflow cells) and ``h`` (beam)
    are samples at ``t_k = k T / N_t``, ``k = 0..N_t-1``, shaped ``(N_t, size)``.
    """

    period: float
    omega1_profile: InflowProfile | None = None
    omega1_time: FourierSeries | None = None
    omega2_profile: np.ndarray | None = None
    omega2_time: FourierSeries | None = None
    f: np.ndarray | None = None
    w: np.ndarray | None = None
    theta: np.ndarray | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def has_omega1(self):
        if self.omega1_profile is None or self.omega1_time is None or self.omega1_time.is_zero:
            return False
        prof = self.omega1_profile
        return bool(np.any(prof.normal) or (prof.tangential is not None and np.any(prof.tangential)))

    @property
    def has_omega2(self):
        return (self.omega2_profile is not None and self.omega2_time is not None
                and not self.omega2_time.is_zero and np.any(self.omega2_profile != 0))

    @property
    def is_zero(self):
        samples = [a for a in (self.f, self.w, self.theta, self.h) if a is not None]
        return (not self.has_omega1 and not self.has_omega2
                and all(not np.any(a) for a in samples))

    def scaled(self, a):
        def sc(x):
            return None if x is None else a * x
        return replace(self,
                       omega1_time=None if self.omega1_time is None else self.omega1_time.scaled(a),
                       omega2_time=None if self.omega2_time is None else self.omega2_time.scaled(a),
                       f=sc(self.f), w=sc(self.w), theta=sc(self.theta), h=sc(self.h))

    def with_samples(self, **samples):
        return replace(self, **samples)


def default_inflow_profile(grid: Grid2D) -> InflowProfile:
    """``(z (1 - z))^2``: vanishes with its slope at both walls."""
    return InflowProfile.from_function(grid, lambda z: (z * (1 - z)) ** 2)


def default_outflow_profile(grid: Grid2D) -> np.ndarray:
    return np.sin(np.pi * grid.z_centers)


def single_frequency_forcing(grid: Grid2D, period=1.0, amp1=0.0, amp2=0.0) -> PeriodicForcing:
    """``omega1 = amp1 (z(1-z))^2 sin(2 pi t/T)``, ``omega2 = amp2 sin(pi z) sin(2 pi t/T)``."""
    return PeriodicForcing(
        period,
        default_inflow_profile(grid), FourierSeries(period, sin=(amp1,)),
        default_outflow_profile(grid), FourierSeries(period, sin=(amp2,)))


def periodic_time_derivative(samples, dt):
    """Centred differences of periodic samples along axis 0."""
    return (np.roll(samples, -1, axis=0) - np.roll(samples, 1, axis=0)) / (2 * dt)


# ----------------------------------------------------------------------
# propagators
class DenseSurrogate:
    """``y' = A y + f(t)`` with a small dense generator; theta-scheme in time."""

    def __init__(self, A, period=1.0, n_steps=64, theta=0.5, forcing=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.period = float(period)
        self.n_steps = int(n_steps)
        self.theta = float(theta)
        self.forcing = forcing
        n = self.A.shape[0]
        dt = self.dt
        I = np.eye(n)
        self._lhs = sla.lu_factor(I - self.theta * dt * self.A)
        self._rhs = I + (1 - self.theta) * dt * self.A

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def dt(self):
        return self.period / self.n_steps

    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def _f(self, t, forced):
        if not forced or self.forcing is None:
            return np.zeros(self.dim)
        return np.atleast_1d(np.asarray(self.forcing(t), dtype=float))

    def propagate(self, y0, forced=True, store=False):
        y = np.array(y0, dtype=float).reshape(self.dim)
        traj = [y.copy()] if store else None
        dt, th = self.dt, self.theta
        for n in range(self.n_steps):
            t0, t1 = n * dt, (n + 1) * dt
            rhs = self._rhs @ y + dt * (th * self._f(t1, forced) + (1 - th) * self._f(t0, forced))
            y = sla.lu_solve(self._lhs, rhs)
            if store:
                traj.append(y.copy())
        return (y, traj) if store else y

    def norm(self, y):
        return float(np.linalg.norm(y))

    def constrain(self, y):
        return y


class ScalarSurrogate(DenseSurrogate):
    """``y' = a y + f(t)``."""

    def __init__(self, a=-1.0, period=1.0, n_steps=64, theta=0.5, forcing=None):
        super().__init__([[a]], period, n_steps, theta, forcing)


class CoupledPropagator:
    """Period map of the coupled system with assembled forcing."""

    def __init__(self, system: CoupledSystem, period=1.0, n_steps=64, theta=0.5,
                 forcing: PeriodicForcing | None = None):
        self.system = system
        self.period = float(period)
        self.n_steps = int(n_steps)
        self.theta = float(theta)
        self.forcing = forcing
        self.assembled = None if forcing is None or forcing.is_zero else \
            assemble_forcing(system, forcing, self.n_steps)

    @property
    def dim(self):
        return self.system.dim

    @property
    def dt(self):
        return self.period / self.n_steps

    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def propagate(self, y0, forced=True, store=False):
        y = np.array(y0, dtype=float)
        traj = [y.copy()] if store else None
        rhs = self.assembled.rhs if (forced and self.assembled is not None) else None
        n_t = self.n_steps
        for n in range(n_t):
            r0 = None if rhs is None else rhs[n % n_t]
            r1 = None if rhs is None else rhs[(n + 1) % n_t]
            y = self.system.step(y, self.dt, r0, r1, self.theta, step_index=n)
            if store:
                traj.append(y.copy())
        return (y, traj) if store else y

    def norm(self, y):
        return self.system.norm(y)

    def constrain(self, y):
        return self.system.constrain(y)


def propagate_period(propagator, y0, forced=True):
    """End state after one period from ``y0``."""
    return propagator.propagate(y0, forced=forced)


# ----------------------------------------------------------------------
# assembled forcing of the coupled problem
@dataclass
class AssembledForcing:
    rhs: list
    inflow_u: np.ndarray | None = None
    inflow_p: np.ndarray | None = None
    outflow_p: np.ndarray | None = None
    w: np.ndarray | None = None


def assemble_forcing(system: CoupledSystem, forcing: PeriodicForcing, n_steps: int) -> AssembledForcing:
    """Evaluate ``F`` and ``H`` at the time nodes ``t_k = k dt``, ``k < N_t``.

    ``F = f - w_t + nu Lap w - d/dt Li1 - grad(lo)`` and
    ``H = h + (lo + Li2)_top - nu (K (w + Li1))_top / m``, where ``(Li1, Li2)``
    is the inflow lifting and ``lo`` the outflow-pressure lifting of
    ``omega2 + theta``.
    """
    g = system.grid
    nu = system.nu
    dt = forcing.period / n_steps
    times = np.arange(n_steps) * dt
    top = system.top
    K = g.stiffness
    m = system.m
    out = AssembledForcing(rhs=[])

    if forcing.has_omega1:
        ui, pi = lift_gamma_i(forcing.omega1_profile, g, nu)
        out.inflow_u, out.inflow_p = ui.flat, pi.flat
        a1 = forcing.omega1_time(times)
        da1 = forcing.omega1_time.derivative(times)
    if forcing.has_omega2:
        lo2 = lift_gamma_o(forcing.omega2_profile, g).flat
        a2 = forcing.omega2_time(times)
    w = forcing.w
    if w is not None:
        w = np.array(w, dtype=float)
        w[:, g.dirichlet_faces] = 0.0
        out.w = w
        wt = periodic_time_derivative(w, dt)
    for k, t in enumerate(times):
        F = np.zeros(g.n_faces)
        H = np.zeros(g.nx)
        theta_k = np.zeros(g.nz)
        if forcing.f is not None:
            F += forcing.f[k]
        if w is not None:
            F += -wt[k] + nu * laplacian_faces(g, w[k])
            H += -nu * (K @ w[k])[top] / m
        if forcing.has_omega1:
            F += -da1[k] * out.inflow_u
            H += a1[k] * (out.inflow_p[g.top_cells] - nu * (K @ out.inflow_u)[top] / m)
        lo = np.zeros(g.n_cells)
        if forcing.has_omega2:
            lo += a2[k] * lo2
            theta_k += a2[k] * forcing.omega2_profile
        if forcing.theta is not None:
            lo += lift_gamma_o(forcing.theta[k], g).flat
            theta_k += forcing.theta[k]
        if np.any(theta_k):
            F += -gradient_with_outflow(ScalarField(g, lo), theta_k).flat
            H += lo[g.top_cells]
        if forcing.h is not None:
            H += forcing.h[k]
        F[g.dirichlet_faces] = 0.0
        out.rhs.append(EvolutionRHS(F, H))
    return out


# ----------------------------------------------------------------------
# fixed point of the period map
@dataclass
class PeriodicICResult:
    y0: np.ndarray
    b: np.ndarray
    krylov_iterations: int
    linear_residual: float
    defect: float


def solve_periodic_initial_condition(propagator, rtol=1e-12, maxiter=200, x0=None,
                                     spectral_check=None) -> PeriodicICResult:
    """Solve ``(I - S(T)) y = b`` with ``b`` the forced response of the zero state."""
    n = propagator.dim
    b = propagator.propagate(np.zeros(n), forced=True)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return PeriodicICResult(np.zeros(n), b, 0, 0.0, 0.0)

    def matvec(y):
        y = propagator.constrain(np.asarray(y, dtype=float).ravel())
        return y - propagator.propagate(y, forced=False)

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    iters = [0]

    def count(_):
        iters[0] += 1

    y, info = spla.gmres(op, b, x0=x0, rtol=rtol, atol=0.0, restart=min(n, 80),
                         maxiter=maxiter, callback=count, callback_type="pr_norm")
    res = float(np.linalg.norm(matvec(y) - b) / bnorm)
    if info != 0 and res > 1e-8:
        diag = spectral_check() if spectral_check is not None else None
        raise SolverFailure("Krylov solve of (I - S(T)) y = b stagnated",
                            residual=res, iterations=iters[0], spectral=diag)
    y = propagator.constrain(y)
    end = propagator.propagate(y, forced=True)
    defect = propagator.norm(end - y)
    return PeriodicICResult(y, b, iters[0], res, float(defect))


def check_spectral_criterion(propagator, margin=1e-6, k=6, tol=1e-10, maxiter=None) -> dict:
    """Dominant eigenvalues of ``S(T)``; admissible when every one stays ``margin`` away from 1."""
    n = propagator.dim

    def matvec(y):
        y = propagator.constrain(np.asarray(y, dtype=float).ravel())
        return propagator.propagate(y, forced=False)

    report = {"admissible": False, "status": "inconclusive", "rho_max": float("nan"),
              "dominant": [], "margin": margin}
    try:
        if n <= 2 * k + 2:
            M = np.column_stack([matvec(e) for e in np.eye(n)])
            vals = np.linalg.eigvals(M)
        else:
            op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
            v0 = propagator.constrain(np.random.default_rng(12345).standard_normal(n))
            vals = spla.eigs(op, k=k, which="LM", tol=tol, v0=v0,
                             maxiter=maxiter, return_eigenvectors=False)
    except (spla.ArpackNoConvergence, spla.ArpackError) as exc:
        report["error"] = str(exc)
        return report
    vals = np.asarray(vals)
    order = np.argsort(-np.abs(vals))
    vals = vals[order]
    rho = float(np.abs(vals[0]))
    dist = float(np.min(np.abs(vals - 1.0)))
    report.update(rho_max=rho, distance_from_one=dist,
                  dominant=[complex(v) for v in vals],
                  admissible=bool(dist > margin),
                  status="ok")
    return report


def dense_monodromy(propagator) -> np.ndarray:
    """Column-by-column ``S(T)`` (small grids only)."""
    n = propagator.dim
    cols = []
    for e in np.eye(n):
        cols.append(propagator.propagate(propagator.constrain(e), forced=False))
    return np.column_stack(cols)


# ----------------------------------------------------------------------
# full reconstruction
@dataclass
class PeriodicTrajectory:
    times: np.ndarray
    states: list
    velocity: np.ndarray
    pressure: np.ndarray
    eta: np.ndarray
    eta_t: np.ndarray
    defect: float
    diagnostics: dict = field(default_factory=dict)


def solve_periodic_linear_fsi(system: CoupledSystem, forcing: PeriodicForcing, n_steps=64,
                              theta=0.5, tol=1e-7, rtol=1e-12, check_spectrum=False,
                              margin=1e-6) -> PeriodicTrajectory:
    """Periodic trajectory with full velocity and pressure on the time nodes."""
    g = system.grid
    prop = CoupledPropagator(system, forcing.period, n_steps, theta, forcing)
    diag = {}
    if check_spectrum:
        rep = check_spectral_criterion(prop, margin=margin)
        diag["spectral"] = rep
        if not rep["admissible"]:
            raise SolverFailure("spectral criterion not satisfied", spectral=rep)
    n_t = n_steps
    times = prop.times()
    if forcing.is_zero:
        z = np.zeros(prop.dim)
        ic = PeriodicICResult(z, z, 0, 0.0, 0.0)
    else:
        ic = solve_periodic_initial_condition(prop, rtol=rtol)
    diag.update(krylov_iterations=ic.krylov_iterations, linear_residual=ic.linear_residual)
    if forcing.is_zero:
        ys = [np.zeros(prop.dim)] * (n_t + 1)
    else:
        _, ys = prop.propagate(ic.y0, forced=True, store=True)
    defect = prop.norm(ys[-1] - ys[0])
    diag["defect"] = defect
    if defect > tol:
        raise PeriodicityDefect(f"periodicity defect {defect:.3e} above {tol:.1e}",
                                defect=defect)
    states = [system.to_state(y) for y in ys]
    eta = np.array([s.eta for s in states])
    eta_t = np.array([s.eta_t for s in states])
    dt = prop.dt
    # pressure q = -d/dt N_s(eta_t) + N_v(Pv) + N_p(F) at t_k, k < N_t
    ns = ns_flat(g, eta_t[:n_t].T).T
    dns = periodic_time_derivative(ns, dt)
    asm = prop.assembled
    q = np.zeros((n_t, g.n_cells))
    u = np.zeros((n_t, g.n_faces))
    p = np.zeros((n_t, g.n_cells))
    a1 = forcing.omega1_time(times[:n_t]) if forcing.has_omega1 else None
    a2 = forcing.omega2_time(times[:n_t]) if forcing.has_omega2 else None
    lo2 = lift_gamma_o(forcing.omega2_profile, g).flat if forcing.has_omega2 else None
    for k in range(n_t):
        s = states[k]
        q[k] = -dns[k] + system.lifts.nv(s.pv, s.eta_t)
        if asm is not None:
            q[k] += np_flat(g, asm.rhs[k].F)
        u[k] = system.velocity(ys[k])
        p[k] = q[k]
        if asm is not None and asm.w is not None:
            u[k] += asm.w[k]
        if a1 is not None:
            u[k] += a1[k] * asm.inflow_u
            p[k] += a1[k] * asm.inflow_p
        if a2 is not None:
            p[k] += a2[k] * lo2
        if forcing.theta is not None:
            p[k] += lift_gamma_o(forcing.theta[k], g).flat
    velocity = np.concatenate([u, u[:1]])
    pressure = np.concatenate([p, p[:1]])
    return PeriodicTrajectory(times, states, velocity, pressure, eta, eta_t, defect, diag)


def trajectory_norm(system: CoupledSystem, traj: PeriodicTrajectory) -> float:
    """``sup_t`` of the discrete L2 norms of velocity, pressure, deflection and beam velocity."""
    g = system.grid
    W = g.face_weights
    vals = []
    for k in range(len(traj.times) - 1):
        vals.append(np.sqrt(np.sum(W * traj.velocity[k] ** 2))
                    + np.sqrt(g.cell_weight * np.sum(traj.pressure[k] ** 2))
                    + np.sqrt(max(system.beam.h2(traj.eta[k], traj.eta[k]), 0.0))
                    + np.sqrt(system.m * np.sum(traj.eta_t[k] ** 2)))
    return float(max(vals))


def forcing_norm(system: CoupledSystem, forcing: PeriodicForcing, n_steps: int) -> float:
    """``sup_t`` surrogate of the data norm (profiles scaled by time factors)."""
    g = system.grid
    t = np.arange(n_steps) * forcing.period / n_steps
    total = 0.0
    if forcing.has_omega1:
        prof = np.sqrt(g.dz * np.sum(forcing.omega1_profile.normal ** 2))
        total += prof * np.max(np.abs(forcing.omega1_time(t)))
    if forcing.has_omega2:
        prof = np.sqrt(g.dz * np.sum(forcing.omega2_profile ** 2))
        total += prof * np.max(np.abs(forcing.omega2_time(t)))
    for arr, w in ((forcing.f, g.face_weights), (forcing.w, g.face_weights)):
        if arr is not None:
            total += float(np.max(np.sqrt(np.sum(w * arr**2, axis=1))))
    if forcing.theta is not None:
        total += float(np.max(np.sqrt(g.dz * np.sum(forcing.theta**2, axis=1))))
    if forcing.h is not None:
        total += float(np.max(np.sqrt(g.dx * np.sum(forcing.h**2, axis=1))))
    return total


def empirical_linear_constant(system: CoupledSystem, probes, n_steps=64, theta=0.5) -> dict:
    """``max`` over nonzero probes of solution norm over data norm."""
    ratios = []
    for fc in probes:
        dn = forcing_norm(system, fc, n_steps)
        if dn == 0:
            continue
        traj = solve_periodic_linear_fsi(system, fc, n_steps, theta)
        ratios.append(trajectory_norm(system, traj) / dn)
    if not ratios:
        raise ValueError("no nonzero probe supplied")
    return {"C_L": float(max(ratios)), "ratios": ratios}
