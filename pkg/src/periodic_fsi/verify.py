"""Invariant suite run by ``periodic-fsi verify``.

Each check returns a :class:`Check` holding the measured value, the
threshold and the verdict.  The suite is deterministic for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import BeamOperator, spectral_abscissa
from .coupled import coupled_system
from .grid import Grid2D, VectorField
from .leray import leray_project
from .nonlinear import solve_periodic_fsi, x_norm
from .periodic import (CoupledPropagator, check_spectral_criterion, single_frequency_forcing,
                       solve_periodic_linear_fsi)
from .stokes import (InflowProfile, inflow_lift, manufactured_order, reflection_lift,
                     solve_stokes_mixed, stokes_projection_equivalence)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    comparison: str = "<="

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name:<40s} {self.value:.6e} {self.comparison} {self.threshold:.1e}"


def _below(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value <= threshold))


def _above(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value >= threshold), ">=")


def _rel(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / nb if nb > 0 else np.linalg.norm(a - b)


def check_leray(grid: Grid2D, rng) -> list:
    u = VectorField(grid, rng.standard_normal(grid.shape("x-face")),
                    rng.standard_normal(grid.shape("z-face")))
    pu = leray_project(u).projected
    ppu = leray_project(pu).projected
    div = grid.div @ pu.flat
    bnd = np.abs(pu.flat[grid.dirichlet_faces]).max()
    return [_below("leray idempotence", _rel(ppu.flat, pu.flat), 1e-10),
            _below("leray divergence", np.abs(div).max(), 1e-10),
            _below("leray normal trace", bnd, 1e-12)]


def check_stokes(grid: Grid2D, nu: float, rng) -> list:
    out = []
    rep = manufactured_order(16, 8, grid.length, 1.0, nu)
    out.append(_above("stokes manufactured velocity order", rep["velocity_order"], 1.8))
    out.append(_above("stokes manufactured pressure order", rep["pressure_order"], 1.8))
    f = VectorField(grid, rng.standard_normal(grid.shape("x-face")),
                    rng.standard_normal(grid.shape("z-face")))
    g = np.sin(np.pi * grid.x_centers / grid.length)
    eq = stokes_projection_equivalence(1.0, f, g, nu=nu, grid=grid)
    out.append(_below("stokes projected velocity", eq["velocity_rel"], 1e-8))
    out.append(_below("stokes projected pressure", eq["pressure_rel"], 1e-8))
    lift = reflection_lift(g, grid, nu)
    ref = solve_stokes_mixed(0.0, None, g, nu=nu, grid=grid)
    out.append(_below("reflection lift vs mixed solve", _rel(lift.u.flat, ref.u.flat), 1e-8))
    omega = InflowProfile.from_function(grid, lambda z: (z * (1 - z)) ** 2)
    il = inflow_lift(omega, grid, nu)
    ref = solve_stokes_mixed(0.0, None, None, omega, nu=nu, grid=grid)
    out.append(_below("inflow lift vs mixed solve", _rel(il.u.flat, ref.u.flat), 1e-8))
    return out


def check_beam(grid: Grid2D, params) -> list:
    beam = BeamOperator(grid.nx, grid.length, params)
    A = beam.A
    sym = np.abs(A - A.T).max() / np.abs(A).max()
    lam_min = np.linalg.eigvalsh(-0.5 * (A + A.T)).min()
    return [_below("beam operator symmetry", sym, 1e-12),
            _above("beam -A smallest eigenvalue", lam_min, 0.0),
            _below("beam spectral abscissa", spectral_abscissa(beam.block()), 0.0)]


def check_coupled(system, rng) -> list:
    eigs, sigma = system.rightmost_eigenvalues(20)
    re = max(e["lambda"].real for e in eigs)
    ritz = max(e["ritz_residual"] for e in eigs)
    en = max(e["energy_residual"] for e in eigs)
    y = system.constrain(rng.standard_normal(system.dim))
    energies = [system.energy(y)]
    for k in range(8):
        y = system.step(y, 1.0 / 64)
        energies.append(system.energy(y))
    rise = max(np.diff(energies).max(), 0.0) / energies[0]
    return [_below("rightmost eigenvalue real part", re, 0.0),
            _below("eigenpair residual", ritz, 1e-8),
            _below("eigen energy identity", en, 1e-8),
            _below("discrete energy growth", rise, 1e-12)]


def check_periodic(system, cfg) -> list:
    prop = CoupledPropagator(system, cfg.period, cfg.n_t, cfg.theta)
    rep = check_spectral_criterion(prop, margin=cfg.spectral_margin)
    forcing = single_frequency_forcing(system.grid, cfg.period, 1e-3, 1e-3)
    traj = solve_periodic_linear_fsi(system, forcing, cfg.n_t, cfg.theta, tol=cfg.defect,
                                     rtol=cfg.krylov)
    return [_below("monodromy spectral radius", rep["rho_max"], 1 - cfg.spectral_margin),
            _below("linear periodicity defect", traj.defect, cfg.defect)]


def check_nonlinear(system, cfg) -> list:
    forcing = single_frequency_forcing(system.grid, cfg.period, 0.0, 0.0)
    res = solve_periodic_fsi(system, forcing, cfg.n_t, cfg.theta, tol=cfg.picard)
    return [_below("zero forcing iterations", res.iterations, 1),
            _below("zero forcing solution norm", x_norm(res.solution, system.beam), 0.0)]


def run_suite(cfg, log=None) -> list:
    """Run every invariant check for ``cfg``; returns the list of checks."""
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.grid()
    system = coupled_system(grid, cfg.beam_params())
    checks = []
    for group in (lambda: check_leray(grid, rng),
                  lambda: check_stokes(grid, cfg.nu, rng),
                  lambda: check_beam(grid, cfg.beam_params()),
                  lambda: check_coupled(system, rng),
                  lambda: check_periodic(system, cfg),
                  lambda: check_nonlinear(system, cfg)):
        for c in group():
            checks.append(c)
            if log is not None:
                log(c.line())
    return checks
