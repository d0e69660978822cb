"""Command line front end.

Usage::

    periodic-fsi <subcommand> --config run.ini --out results/ [--seed N] [--override key=value]

Subcommands: ``stokes``, ``eigs``, ``periodic-linear``, ``solve``, ``verify``
and ``sweep``.  Every run writes ``manifest.txt`` into the output directory.
Exit codes: 0 success, 1 failed invariant check, 2 invalid config,
3 solver failure, 4 non-contraction, 5 ball violation.
"""
from __future__ import annotations

import argparse
import datetime
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .config import SolverConfig, load_config
from .coupled import coupled_system
from .errors import (BallViolation, ConfigError, DivergenceFailure, FSIError, SolverFailure,
                     VerificationFailure)
from .grid import Grid2D, ScalarField, VectorField, dump_field
from .nonlinear import solve_periodic_fsi, transformed_residual, x_norm
from .periodic import solve_periodic_linear_fsi, trajectory_norm
from .stokes import manufactured_stokes

EXIT_CODES = {
    VerificationFailure: 1,
    ConfigError: 2,
    DivergenceFailure: 4,
    BallViolation: 5,
}


def exit_code(exc: FSIError) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 3


class Run:
    """Output directory, timings and reported quantities of one invocation."""

    def __init__(self, command, cfg: SolverConfig, out):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.timings = {}
        self.report = {}
        self.lines = []
        os.makedirs(out, exist_ok=True)

    def log(self, line):
        self.lines.append(line)
        print(line)

    def timed(self, name, fun, *args, **kw):
        t0 = time.perf_counter()
        try:
            return fun(*args, **kw)
        finally:
            self.timings[name] = time.perf_counter() - t0

    def path(self, *parts):
        p = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def write_report(self):
        with open(self.path("report.txt"), "w") as fh:
            fh.write("\n".join(self.lines) + "\n")

    def write_manifest(self, status, failure=None):
        """Plain-text manifest.  Only ``created`` and the ``[timing]`` lines vary between runs."""
        rows = [f"command = {self.command}",
                f"status = {status}",
                f"created = {datetime.datetime.now().isoformat(timespec='seconds')}",
                "",
                "[versions]",
                f"periodic_fsi = {__version__}",
                f"python = {platform.python_version()}",
                f"numpy = {np.__version__}",
                f"scipy = {scipy.__version__}",
                "",
                "[report]"]
        for key in sorted(self.report):
            rows.append(f"{key} = {_fmt(self.report[key])}")
        if failure is not None:
            rows += ["", "[failure]"]
            for key, val in failure.report().items():
                rows.append(f"{key} = {_fmt(val)}")
        rows += ["", "[timing]"]
        for key in sorted(self.timings):
            rows.append(f"{key} = {self.timings[key]:.3f}")
        rows += ["", "# configuration", self.cfg.to_ini()]
        with open(self.path("manifest.txt"), "w") as fh:
            fh.write("\n".join(rows))


def _fmt(val):
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    if isinstance(val, (list, tuple)):
        return ", ".join(_fmt(v) for v in val)
    return str(val)


def _dump_velocity(grid: Grid2D, flat, prefix):
    v = VectorField.from_flat(grid, flat)
    dump_field(ScalarField(grid, v.u1, "x-face"), prefix + "_u1.csv")
    dump_field(ScalarField(grid, v.u2, "z-face"), prefix + "_u2.csv")


def _dump_trajectory(run: Run, grid, velocity, pressure, eta, eta_t):
    n = velocity.shape[0]
    for k in range(n):
        base = run.path("fields", f"t{k:04d}")
        _dump_velocity(grid, velocity[k], base)
        dump_field(ScalarField(grid, pressure[k].reshape(grid.nx, grid.nz)), base + "_p.csv")
        dump_field(ScalarField(grid, eta[k], "beam"), base + "_eta.csv")
        dump_field(ScalarField(grid, eta_t[k], "beam"), base + "_eta_t.csv")


# ----------------------------------------------------------------------
# subcommands
def cmd_stokes(run: Run):
    cfg = run.cfg
    grid = cfg.grid()
    coarse = run.timed("solve", manufactured_stokes, grid, 1.0, cfg.nu)
    fine = run.timed("solve_refined", manufactured_stokes,
                     Grid2D(2 * cfg.nx, 2 * cfg.nz, cfg.length), 1.0, cfg.nu)
    vo = np.log2(coarse["velocity_error"] / fine["velocity_error"])
    po = np.log2(coarse["pressure_error"] / fine["pressure_error"])
    run.report.update(velocity_error=coarse["velocity_error"],
                      pressure_error=coarse["pressure_error"],
                      velocity_order=vo, pressure_order=po,
                      momentum_residual=coarse["residuals"]["momentum"],
                      divergence_residual=coarse["residuals"]["divergence"])
    run.log(f"manufactured solution on {cfg.nx}x{cfg.nz} and {2 * cfg.nx}x{2 * cfg.nz}")
    run.log(f"velocity error {coarse['velocity_error']:.6e} -> {fine['velocity_error']:.6e}"
            f"  order {vo:.3f}")
    run.log(f"pressure error {coarse['pressure_error']:.6e} -> {fine['pressure_error']:.6e}"
            f"  order {po:.3f}")
    sol = coarse["solution"]
    _dump_velocity(grid, sol.u.flat, run.path("stokes"))
    dump_field(sol.p, run.path("stokes_p.csv"))
    return 0


def cmd_eigs(run: Run):
    cfg = run.cfg
    system = coupled_system(cfg.grid(), cfg.beam_params())
    eigs, sigma = run.timed("eigensolve", system.rightmost_eigenvalues, cfg.eig_count)
    run.log(f"{'re':>16s} {'im':>16s} {'ritz':>12s} {'energy':>12s}")
    with open(run.path("eigenvalues.csv"), "w") as fh:
        fh.write("re,im,ritz_residual,energy_residual\n")
        for e in eigs:
            lam = e["lambda"]
            fh.write(f"{lam.real!r},{lam.imag!r},{e['ritz_residual']!r},{e['energy_residual']!r}\n")
            run.log(f"{lam.real:16.9e} {lam.imag:16.9e} {e['ritz_residual']:12.3e} "
                    f"{e['energy_residual']:12.3e}")
    re_max = max(e["lambda"].real for e in eigs)
    run.report.update(max_real_part=re_max, sigma_min=sigma,
                      max_ritz_residual=max(e["ritz_residual"] for e in eigs))
    run.log(f"largest real part {re_max:.9e}; smallest singular value {sigma:.3e}")
    if not re_max < 0:
        raise SolverFailure("an eigenvalue has non-negative real part", max_real_part=re_max)
    return 0


def cmd_periodic_linear(run: Run):
    cfg = run.cfg
    system = coupled_system(cfg.grid(), cfg.beam_params())
    forcing = cfg.forcing(system.grid)
    traj = run.timed("periodic_solve", solve_periodic_linear_fsi, system, forcing, cfg.n_t,
                     cfg.theta, tol=cfg.defect, rtol=cfg.krylov, check_spectrum=True,
                     margin=cfg.spectral_margin)
    rep = traj.diagnostics["spectral"]
    run.report.update(period=cfg.period, dt=cfg.period / cfg.n_t, defect=traj.defect,
                      krylov_iterations=traj.diagnostics["krylov_iterations"],
                      rho_max=rep["rho_max"], spectral_margin=rep["distance_from_one"],
                      trajectory_norm=trajectory_norm(system, traj))
    for key in ("period", "dt", "defect", "krylov_iterations", "rho_max", "trajectory_norm"):
        run.log(f"{key} = {_fmt(run.report[key])}")
    _dump_trajectory(run, system.grid, traj.velocity[:cfg.n_t], traj.pressure[:cfg.n_t],
                     traj.eta[:cfg.n_t], traj.eta_t[:cfg.n_t])
    return 0


def cmd_solve(run: Run):
    cfg = run.cfg
    system = coupled_system(cfg.grid(), cfg.beam_params())
    forcing = cfg.forcing(system.grid)
    res = run.timed("picard", solve_periodic_fsi, system, forcing, cfg.n_t, cfg.theta,
                    tol=cfg.picard, max_iter=cfg.picard_max_iter, mu=cfg.mu, radius=cfg.radius,
                    allow_large=cfg.allow_large, log=run.log)
    with open(run.path("picard.csv"), "w") as fh:
        fh.write("iteration,residual,rate,R_margin,mu_margin\n")
        for r in res.history:
            fh.write(f"{r.iteration},{r.residual!r},{r.rate!r},{r.r_margin!r},{r.mu_margin!r}\n")
    X = res.solution
    run.report.update(iterations=res.iterations, converged=res.converged, defect=res.defect,
                      solution_norm=x_norm(X, system.beam),
                      R_margin=res.diagnostics["R_margin"],
                      mu_margin=res.diagnostics["mu_margin"],
                      min_one_plus_eta=res.diagnostics["min_one_plus_eta"])
    if "warning" in res.diagnostics:
        run.report["warning"] = res.diagnostics["warning"]
    if res.iterations > 0 and x_norm(X, system.beam) > 0:
        chk = run.timed("residual", transformed_residual, system, forcing, res, theta=cfg.theta)
        for key, val in chk.items():
            run.report[f"residual_{key}"] = val
    for key in sorted(run.report):
        run.log(f"{key} = {_fmt(run.report[key])}")
    _dump_trajectory(run, system.grid, X.u, X.p, X.eta, X.eta_t)
    if not res.converged:
        raise DivergenceFailure(
            f"Picard iteration did not reach {cfg.picard:.1e} in {cfg.picard_max_iter} iterations; "
            "lower the forcing amplitude", iterations=res.iterations)
    return 0


def cmd_verify(run: Run):
    from .verify import run_suite
    checks = run.timed("suite", run_suite, run.cfg, log=run.log)
    for c in checks:
        run.report[c.name.replace(" ", "_")] = c.value
    failed = [c.name for c in checks if not c.passed]
    run.report["checks_failed"] = len(failed)
    run.log(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        raise VerificationFailure("invariant checks failed: " + ", ".join(failed), failed=failed)
    return 0


def cmd_sweep(run: Run):
    """Continuation in a forcing amplitude or in the damping ``gamma``."""
    cfg = run.cfg
    name = cfg.parameter
    if name not in ("omega1_amplitude", "omega2_amplitude", "gamma"):
        raise ConfigError([f"sweep.parameter must be omega1_amplitude, omega2_amplitude or "
                           f"gamma (got {name!r})"])
    grid = cfg.grid()
    rows = []
    X0 = None
    for val in cfg.values:
        sub = SolverConfig(**{**cfg.as_dict(), name: val}).validate()
        system = coupled_system(grid, sub.beam_params())
        if name == "gamma":
            eigs, _ = run.timed(f"eigs_{val!r}", system.rightmost_eigenvalues, 1)
            traj = run.timed(f"linear_{val!r}", solve_periodic_linear_fsi, system,
                             sub.forcing(grid), sub.n_t, sub.theta, tol=sub.defect,
                             rtol=sub.krylov)
            row = (val, eigs[0]["lambda"].real, trajectory_norm(system, traj), traj.defect)
            run.log(f"gamma {val:.4e}  max Re {row[1]:.6e}  norm {row[2]:.6e}  defect {row[3]:.3e}")
        else:
            res = run.timed(f"solve_{val!r}", solve_periodic_fsi, system, sub.forcing(grid),
                            sub.n_t, sub.theta, tol=sub.picard, max_iter=sub.picard_max_iter,
                            mu=sub.mu, radius=sub.radius, allow_large=sub.allow_large, X0=X0)
            X0 = res.solution
            rates = res.diagnostics["rates"]
            row = (val, res.iterations, x_norm(res.solution, system.beam),
                   max(rates) if rates else 0.0)
            run.log(f"{name} {val:.4e}  iterations {row[1]}  norm {row[2]:.6e}  "
                    f"max rate {row[3]:.3e}")
        rows.append(row)
    header = ("gamma,max_real_part,trajectory_norm,defect" if name == "gamma"
              else f"{name},iterations,solution_norm,max_rate")
    with open(run.path("sweep.csv"), "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    run.report["sweep_points"] = len(rows)
    return 0


COMMANDS = {
    "stokes": cmd_stokes,
    "eigs": cmd_eigs,
    "periodic-linear": cmd_periodic_linear,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="periodic-fsi",
                                     description="Time-periodic fluid-beam interaction solver.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"failure_class: {exc.failure_class}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "validation.txt"), "w") as fh:
            fh.write("\n".join(exc.violations) + "\n")
        return exit_code(exc)
    run = Run(args.command, cfg, args.out)
    try:
        status = COMMANDS[args.command](run)
    except FSIError as exc:
        run.log(f"failure_class: {exc.failure_class}")
        run.log(str(exc))
        run.write_report()
        run.write_manifest("failed", exc)
        print(f"failure_class: {exc.failure_class}", file=sys.stderr)
        return exit_code(exc)
    run.write_report()
    run.write_manifest("ok")
    return status


if __name__ == "__main__":
    sys.exit(main())
