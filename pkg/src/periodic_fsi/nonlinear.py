"""Nonlinear periodic problem on the fixed rectangle.

The moving fluid domain ``{0 < y < 1 + eta(x, t)}`` is mapped onto the unit
channel by ``z = y / (1 + eta)``.  In the new variables the problem is the
linear one plus the nonlinear data

* ``G(u, p, eta)``: momentum source,
* ``w(u, eta) = -eta u1 e1 + z eta_x u1 e2``: divergence datum,
* ``Theta(u) = |u|^2 / 2`` on the outflow,
* ``Psi(u, eta)``: extra beam load,

and a periodic solution is the fixed point of "solve the linear periodic
problem with these data evaluated at the previous iterate".

All fields are trajectories sampled at ``t_k = k T / N_t``.  Spatial
derivatives use centred differences on the staggered grid (ghost values from
the wall conditions), time derivatives periodic centred differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .beam import second_difference
from .coupled import CoupledSystem
from .errors import BallViolation, DivergenceFailure, DomainDegeneracy
from .grid import Grid2D
from .periodic import (PeriodicForcing, periodic_time_derivative,
                       solve_periodic_linear_fsi)


@dataclass
class TransformedSolution:
    """Periodic trajectory on the fixed domain; arrays are ``(N_t, ...)``."""

    grid: Grid2D
    period: float
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    eta_t: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid2D, period: float, n_steps: int):
        return cls(grid, period, np.zeros((n_steps, grid.n_faces)),
                   np.zeros((n_steps, grid.n_cells)), np.zeros((n_steps, grid.nx)),
                   np.zeros((n_steps, grid.nx)))

    @property
    def n_steps(self):
        return self.u.shape[0]

    @property
    def dt(self):
        return self.period / self.n_steps

    def __sub__(self, other):
        return TransformedSolution(self.grid, self.period, self.u - other.u, self.p - other.p,
                                   self.eta - other.eta, self.eta_t - other.eta_t)

    def scaled(self, a):
        return TransformedSolution(self.grid, self.period, a * self.u, a * self.p,
                                   a * self.eta, a * self.eta_t)

    def u1(self):
        g = self.grid
        return self.u[:, :g.n_u1].reshape(-1, g.nx + 1, g.nz)

    def u2(self):
        g = self.grid
        return self.u[:, g.n_u1:].reshape(-1, g.nx, g.nz + 1)

    def pc(self):
        return self.p.reshape(-1, self.grid.nx, self.grid.nz)


def x_norm(X: TransformedSolution, beam=None) -> float:
    """Discrete stand-in for the solution norm: ``sup_t`` of the spatial norms of
    ``u``, ``u_t``, ``p``, ``eta`` (energy norm) and ``eta_t``."""
    g = X.grid
    W = g.face_weights
    ut = periodic_time_derivative(X.u, X.dt)
    a = np.sqrt(np.sum(W * X.u**2, axis=1))
    b = np.sqrt(np.sum(W * ut**2, axis=1))
    c = np.sqrt(g.cell_weight * np.sum(X.p**2, axis=1))
    if beam is None:
        d = np.sqrt(g.dx * np.sum((X.eta @ second_difference(g.nx, g.dx).T) ** 2, axis=1))
    else:
        d = np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", X.eta, beam.stiffness, X.eta) * g.dx, 0))
    e = np.sqrt(g.dx * np.sum(X.eta_t**2, axis=1))
    return float(np.max(a + b + c + d + e))


# ----------------------------------------------------------------------
# beam quantities at the two kinds of abscissae
def _ghost(eta):
    """Clamped ghost values ``(left, right)`` of nodal beam data (last axis)."""
    left = 2 * eta[..., 0] - eta[..., 1] / 9
    right = 2 * eta[..., -1] - eta[..., -2] / 9
    return left, right


def beam_at_centers(eta, h):
    """``(eta, eta_x, eta_xx)`` at the beam nodes (cell-centre abscissae)."""
    left, right = _ghost(eta)
    ext = np.concatenate([left[..., None], eta, right[..., None]], axis=-1)
    ex = (ext[..., 2:] - ext[..., :-2]) / (2 * h)
    exx = (ext[..., 2:] - 2 * ext[..., 1:-1] + ext[..., :-2]) / h**2
    return eta, ex, exx


def beam_at_vertices(eta, h):
    """``(eta, eta_x, eta_xx)`` at ``x_i = i h``, clamped ends."""
    shape = eta.shape[:-1] + (eta.shape[-1] + 1,)
    ev = np.zeros(shape)
    ev[..., 1:-1] = 0.5 * (eta[..., 1:] + eta[..., :-1])
    exv = np.zeros(shape)
    exv[..., 1:-1] = (eta[..., 1:] - eta[..., :-1]) / h
    _, _, exx = beam_at_centers(eta, h)
    exxv = np.empty(shape)
    exxv[..., 1:-1] = 0.5 * (exx[..., 1:] + exx[..., :-1])
    exxv[..., 0] = 1.5 * exx[..., 0] - 0.5 * exx[..., 1]
    exxv[..., -1] = 1.5 * exx[..., -1] - 0.5 * exx[..., -2]
    return ev, exv, exxv


def _check_domain(eta):
    m = float(np.min(1 + eta)) if np.size(eta) else 1.0
    if not m > 0:
        raise DomainDegeneracy(f"1 + eta reaches {m:.3e} <= 0", min_one_plus_eta=m)


# ----------------------------------------------------------------------
# staggered derivatives; arrays carry a leading time axis
def _d(a, h, axis):
    return np.gradient(a, h, axis=axis, edge_order=2)


def _d2(a, h, axis):
    a = np.moveaxis(a, axis, -1)
    out = np.empty_like(a)
    out[..., 1:-1] = (a[..., 2:] - 2 * a[..., 1:-1] + a[..., :-2]) / h**2
    out[..., 0] = (2 * a[..., 0] - 5 * a[..., 1] + 4 * a[..., 2] - a[..., 3]) / h**2
    out[..., -1] = (2 * a[..., -1] - 5 * a[..., -2] + 4 * a[..., -3] - a[..., -4]) / h**2
    return np.moveaxis(out, -1, axis)


@dataclass
class _Staggered:
    """Velocity derivatives at the x-faces (component 1) and z-faces (component 2)."""

    u1: np.ndarray
    u1x: np.ndarray
    u1z: np.ndarray
    u1xx: np.ndarray
    u1zz: np.ndarray
    u1xz: np.ndarray
    u2_on_1: np.ndarray
    u2: np.ndarray
    u2x: np.ndarray
    u2z: np.ndarray
    u2xx: np.ndarray
    u2zz: np.ndarray
    u2xz: np.ndarray
    u1_on_2: np.ndarray
    u1e: np.ndarray
    u2e: np.ndarray


def _velocity_derivatives(g: Grid2D, u1, u2):
    dx, dz = g.dx, g.dz
    # u1 with ghost rows below and above (zero tangential velocity on the walls)
    u1e = np.concatenate([-u1[:, :, :1], u1, -u1[:, :, -1:]], axis=2)
    u1z = (u1e[:, :, 2:] - u1e[:, :, :-2]) / (2 * dz)
    u1zz = (u1e[:, :, 2:] - 2 * u1 + u1e[:, :, :-2]) / dz**2
    u1x = _d(u1, dx, 1)
    u1xx = _d2(u1, dx, 1)
    u1xz = _d(u1z, dx, 1)
    # u2 with ghost columns left and right (zero tangential velocity on the side walls)
    u2e = np.concatenate([-u2[:, :1, :], u2, -u2[:, -1:, :]], axis=1)
    u2x = (u2e[:, 2:, :] - u2e[:, :-2, :]) / (2 * dx)
    u2xx = (u2e[:, 2:, :] - 2 * u2 + u2e[:, :-2, :]) / dx**2
    u2z = _d(u2, dz, 2)
    u2zz = _d2(u2, dz, 2)
    u2xz = _d(u2x, dz, 2)
    # cross interpolations (four-point averages)
    u2_on_1 = 0.25 * (u2e[:, :-1, :-1] + u2e[:, 1:, :-1] + u2e[:, :-1, 1:] + u2e[:, 1:, 1:])
    u1_on_2 = 0.25 * (u1e[:, :-1, :-1] + u1e[:, 1:, :-1] + u1e[:, :-1, 1:] + u1e[:, 1:, 1:])
    return _Staggered(u1, u1x, u1z, u1xx, u1zz, u1xz, u2_on_1,
                      u2, u2x, u2z, u2xx, u2zz, u2xz, u1_on_2, u1e, u2e)


def _pressure_derivatives(g: Grid2D, p, p_out):
    """``p_x`` and ``p_z`` at the x-faces; ``p_out`` is the outflow pressure value."""
    dx = g.dx
    nt = p.shape[0]
    px = np.empty((nt, g.nx + 1, g.nz))
    px[:, 1:-1, :] = (p[:, 1:, :] - p[:, :-1, :]) / dx
    px[:, 0, :] = px[:, 1, :]
    px[:, -1, :] = (p_out - p[:, -1, :]) / (dx / 2)
    pz_c = _d(p, g.dz, 2)
    pz = np.empty_like(px)
    pz[:, 1:-1, :] = 0.5 * (pz_c[:, 1:, :] + pz_c[:, :-1, :])
    pz[:, 0, :] = 1.5 * pz_c[:, 0, :] - 0.5 * pz_c[:, 1, :]
    pz[:, -1, :] = 1.5 * pz_c[:, -1, :] - 0.5 * pz_c[:, -2, :]
    return px, pz


# ----------------------------------------------------------------------
# the nonlinear functionals
@dataclass
class NonlinearEvaluation:
    G: np.ndarray
    w: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray


def evaluate_theta(X: TransformedSolution) -> np.ndarray:
    """``|u|^2 / 2`` on the outflow (``u2`` vanishes there)."""
    return 0.5 * X.u1()[:, -1, :] ** 2


def evaluate_w(X: TransformedSolution) -> np.ndarray:
    g = X.grid
    _check_domain(X.eta)
    st = _velocity_derivatives(g, X.u1(), X.u2())
    ev, _, _ = beam_at_vertices(X.eta, g.dx)
    _, ex, _ = beam_at_centers(X.eta, g.dx)
    zf = g.z_nodes[None, None, :]
    w1 = -ev[:, :, None] * st.u1
    w2 = zf * ex[:, :, None] * st.u1_on_2
    return np.concatenate([w1.reshape(len(w1), -1), w2.reshape(len(w2), -1)], axis=1)


def evaluate_psi(X: TransformedSolution, nu: float) -> np.ndarray:
    g = X.grid
    _check_domain(X.eta)
    dz = g.dz
    u1 = X.u1()
    u2 = X.u2()
    e, ex, _ = beam_at_centers(X.eta, g.dx)
    # u1_z on the top wall (zero wall value), second order one-sided
    u1z_top_f = (-9 * u1[:, :, -1] + u1[:, :, -2]) / (3 * dz)
    u1z_top = 0.5 * (u1z_top_f[:, 1:] + u1z_top_f[:, :-1])
    _, u2x_top, _ = beam_at_centers(u2[:, :, -1], g.dx)
    u2z_top = (3 * u2[:, :, -1] - 4 * u2[:, :, -2] + u2[:, :, -3]) / (2 * dz)
    return nu * (ex / (1 + e) * u1z_top + ex * u2x_top
                 - (ex**2 - 2 * e) / (1 + e) * u2z_top)


def evaluate_G(X: TransformedSolution, nu: float, p_out=None) -> np.ndarray:
    """Momentum source on every face (wall rows are computed but unused)."""
    g = X.grid
    _check_domain(X.eta)
    u1 = X.u1()
    u2 = X.u2()
    st = _velocity_derivatives(g, u1, u2)
    if p_out is None:
        p_out = np.zeros((X.n_steps, g.nz))
    px, pz = _pressure_derivatives(g, X.pc(), p_out)
    ut = periodic_time_derivative(X.u, X.dt)
    u1t = ut[:, :g.n_u1].reshape(u1.shape)
    u2t = ut[:, g.n_u1:].reshape(u2.shape)
    # component 1 at x-faces
    e, ex, exx = (a[:, :, None] for a in beam_at_vertices(X.eta, g.dx))
    et = beam_at_vertices(X.eta_t, g.dx)[0][:, :, None]
    z = g.z_centers[None, None, :]
    G1 = (-e * u1t
          + (z * et + nu * z * (ex**2 / (1 + e) - exx)) * st.u1z
          + nu * (-2 * z * ex * st.u1xz + e * st.u1xx
                  + (z**2 * ex**2 - e) / (1 + e) * st.u1zz)
          + z * ex * pz - z * e * px
          - (1 + e) * st.u1 * st.u1x + (z * ex * st.u1 - st.u2_on_1) * st.u1z)
    # component 2 at z-faces
    e, ex, exx = (a[:, :, None] for a in beam_at_centers(X.eta, g.dx))
    et = X.eta_t[:, :, None]
    z = g.z_nodes[None, None, :]
    G2 = (-e * u2t
          + (z * et + nu * z * (ex**2 / (1 + e) - exx)) * st.u2z
          + nu * (-2 * z * ex * st.u2xz + e * st.u2xx
                  + (z**2 * ex**2 - e) / (1 + e) * st.u2zz)
          - (1 + e) * st.u1_on_2 * st.u2x + (z * ex * st.u1_on_2 - st.u2) * st.u2z)
    n = X.n_steps
    return np.concatenate([G1.reshape(n, -1), G2.reshape(n, -1)], axis=1)


def evaluate_nonlinear(X: TransformedSolution, nu: float, omega2=None) -> NonlinearEvaluation:
    """All four functionals; ``omega2`` (``(N_t, nz)``) sets the outflow pressure."""
    theta = evaluate_theta(X)
    p_out = -theta if omega2 is None else omega2 - theta
    return NonlinearEvaluation(evaluate_G(X, nu, p_out), evaluate_w(X), theta,
                               evaluate_psi(X, nu))


def nonlinear_norm(ev: NonlinearEvaluation, grid: Grid2D) -> float:
    """``sup_t`` surrogate of the data norm of ``(G, w, Theta, Psi)``."""
    W = grid.face_weights
    a = np.sqrt(np.sum(W * ev.G**2, axis=1))
    b = np.sqrt(np.sum(W * ev.w**2, axis=1))
    c = np.sqrt(grid.dz * np.sum(ev.Theta**2, axis=1))
    d = np.sqrt(grid.dx * np.sum(ev.Psi**2, axis=1))
    return float(np.max(a + b + c + d))


def nonlinear_difference_norm(e1: NonlinearEvaluation, e2: NonlinearEvaluation, grid) -> float:
    return nonlinear_norm(NonlinearEvaluation(e1.G - e2.G, e1.w - e2.w, e1.Theta - e2.Theta,
                                              e1.Psi - e2.Psi), grid)


# ----------------------------------------------------------------------
# change of variables
def vertical_scale(grid: Grid2D, eta, location: str):
    """``1 + eta`` at the abscissae of the given staggering."""
    eta = np.asarray(eta, dtype=float)
    _check_domain(eta)
    if location == "x-face":
        return 1 + beam_at_vertices(eta, grid.dx)[0]
    if location in ("center", "z-face", "beam"):
        return 1 + eta
    raise ValueError(f"unsupported staggering {location!r}")


def physical_coordinates(grid: Grid2D, eta, location: str):
    """Deformed site coordinates ``(x, z (1 + eta(x)))``."""
    X, Z = grid.coordinates(location)
    s = vertical_scale(grid, eta, location)
    return X, Z * s[:, None]


def to_transformed(grid: Grid2D, fun, eta, location: str = "center"):
    """Sample a physical field ``fun(x, y)`` at the mapped sites: ``u_hat(x, z) = u(x, z(1+eta))``."""
    X, Y = physical_coordinates(grid, eta, location)
    return fun(X, Y) * np.ones_like(X)


def to_physical(grid: Grid2D, values, eta, y, location: str = "center"):
    """Values at physical heights ``y`` (one row per column) from transformed samples.

    Cubic spline (not-a-knot) in ``z = y / (1 + eta)``; the polynomial end
    pieces extend into the half cells next to the walls.
    """
    X, Z = grid.coordinates(location)
    s = vertical_scale(grid, eta, location)
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    zc = Z[0]
    for i in range(values.shape[0]):
        out[i] = CubicSpline(zc, values[i])(y[i] / s[i])
    return out


# ----------------------------------------------------------------------
# fixed point
@dataclass
class PicardRecord:
    iteration: int
    residual: float
    rate: float
    r_margin: float
    mu_margin: float

    def line(self):
        return (f"iter {self.iteration:3d}  residual {self.residual:.6e}  rate {self.rate:.4e}  "
                f"R-margin {self.r_margin:.6e}  mu-margin {self.mu_margin:.6e}")


@dataclass
class NonlinearResult:
    solution: TransformedSolution
    iterations: int
    history: list
    defect: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def physical(self, location="center"):
        """Deformed coordinates of ``location`` sites at every time node."""
        g = self.solution.grid
        out = []
        for k in range(self.solution.n_steps):
            out.append(physical_coordinates(g, self.solution.eta[k], location))
        return out


class FixedPointMap:
    """``X -> solution of the linear periodic problem with data F(X)``."""

    def __init__(self, system: CoupledSystem, forcing: PeriodicForcing, n_steps=64, theta=0.5,
                 mu=2.0, radius=1.0, rtol=1e-12):
        self.system = system
        self.forcing = forcing
        self.n_steps = int(n_steps)
        self.theta = theta
        self.mu = float(mu)
        self.radius = float(radius)
        self.rtol = rtol
        g = system.grid
        t = np.arange(self.n_steps) * forcing.period / self.n_steps
        if forcing.has_omega2:
            self.omega2 = forcing.omega2_time(t)[:, None] * forcing.omega2_profile[None, :]
        else:
            self.omega2 = np.zeros((self.n_steps, g.nz))
        self.last_defect = 0.0

    def ball_margins(self, X: TransformedSolution):
        r = x_norm(X, self.system.beam)
        m = float(np.min(1 + X.eta)) if X.eta.size else 1.0
        return self.radius - r, m - 1.0 / self.mu

    def check_ball(self, X: TransformedSolution):
        rm, mm = self.ball_margins(X)
        if rm < 0:
            raise BallViolation(f"solution norm exceeds R by {-rm:.3e}", constraint="R", excess=-rm)
        if mm < 0:
            raise BallViolation(f"min(1 + eta) below 1/mu by {-mm:.3e}", constraint="mu", excess=-mm)
        return rm, mm

    def data(self, X: TransformedSolution) -> PeriodicForcing:
        ev = evaluate_nonlinear(X, self.system.nu, self.omega2)
        return self.forcing.with_samples(f=ev.G, w=ev.w, theta=-ev.Theta, h=ev.Psi)

    def __call__(self, X: TransformedSolution, check=True) -> TransformedSolution:
        if check:
            self.check_ball(X)
        fc = self.data(X)
        traj = solve_periodic_linear_fsi(self.system, fc, self.n_steps, self.theta,
                                         rtol=self.rtol)
        self.last_defect = traj.defect
        self.last_trajectory = traj
        n = self.n_steps
        return TransformedSolution(self.system.grid, self.forcing.period, traj.velocity[:n],
                                   traj.pressure[:n], traj.eta[:n], traj.eta_t[:n])


def fixed_point_map(system, X, forcing, n_steps=64, **kw):
    return FixedPointMap(system, forcing, n_steps, **kw)(X)


def solve_periodic_fsi(system: CoupledSystem, forcing: PeriodicForcing, n_steps=64, theta=0.5,
                       tol=1e-8, max_iter=30, mu=2.0, radius=1.0, allow_large=False,
                       X0: TransformedSolution | None = None, log=None,
                       min_iter=1) -> NonlinearResult:
    """Picard iteration of the fixed-point map from ``X0`` (zero by default).

    Stops once the relative update is below ``tol`` and at least ``min_iter``
    iterates have been formed.
    """
    F = FixedPointMap(system, forcing, n_steps, theta, mu, radius)
    g = system.grid
    X = TransformedSolution.zeros(g, forcing.period, n_steps) if X0 is None else X0
    history = []
    diffs = []
    rates = []
    warn = None
    stalled = False
    floor = 1e3 * F.rtol
    for k in range(1, max_iter + 1):
        rm, mm = F.check_ball(X)
        Xn = F(X, check=False)
        if k == 1 and X0 is None:
            # the first iterate is the linear response: its size measures the data against R/2
            size = x_norm(Xn, system.beam)
            if size > radius / 2:
                if not allow_large:
                    raise BallViolation(
                        f"linear response norm {size:.3e} exceeds R/2 = {radius / 2:.3e}; "
                        "reduce the forcing amplitude", constraint="smallness", excess=size - radius / 2)
                warn = "forcing above the smallness threshold"
        d = x_norm(Xn - X, system.beam)
        scale = x_norm(Xn, system.beam)
        rel = d / scale if scale > 0 else d
        rate = d / diffs[-1] if diffs and diffs[-1] > 0 else float("nan")
        diffs.append(d)
        if np.isfinite(rate):
            rates.append(rate)
        rm, mm = F.ball_margins(Xn)
        rec = PicardRecord(k, rel, rate, rm, mm)
        history.append(rec)
        if log is not None:
            log(rec.line())
        X = Xn
        if d == 0.0 or (rel <= tol and k >= min_iter):
            break
        if len(rates) >= 3 and all(r >= 1 for r in rates[-3:]):
            if rel <= floor:
                # updates at the accuracy of the inner periodic solve: stagnation, not divergence
                stalled = True
                break
            raise DivergenceFailure(
                "Picard iteration is not contracting; lower the forcing amplitude",
                rates=rates[-3:], iteration=k)
    converged = bool(history) and (diffs[-1] == 0.0 or history[-1].residual <= tol or stalled)
    diag = {"rates": rates, "min_one_plus_eta": float(np.min(1 + X.eta)) if X.eta.size else 1.0,
            "R_margin": history[-1].r_margin, "mu_margin": history[-1].mu_margin}
    if stalled:
        warn = f"updates stalled at {history[-1].residual:.1e}, the inner solver accuracy"
    if warn:
        diag["warning"] = warn
    return NonlinearResult(X, len(history), history, F.last_defect, converged, diag)


def transformed_residual(system: CoupledSystem, forcing: PeriodicForcing, result: NonlinearResult,
                         n_steps=None, theta=0.5) -> dict:
    """How well a converged trajectory satisfies the transformed system.

    ``fixed_point`` is ``|F(X) - X| / |X|``; ``interface`` the largest gap
    between the top normal velocity and ``eta_t``; ``divergence`` the largest
    ``|div u - div w(u, eta)|``; ``outflow`` the largest gap between the
    pressure value imposed on the outflow and ``omega2 - |u|^2 / 2``.
    """
    X = result.solution
    g = system.grid
    n_steps = X.n_steps if n_steps is None else n_steps
    F = FixedPointMap(system, forcing, n_steps, theta)
    Y = F(X, check=False)
    scale = x_norm(X, system.beam)
    fp = x_norm(Y - X, system.beam) / scale if scale > 0 else x_norm(Y - X, system.beam)
    top = g.boundary_faces["top"]
    interface = float(np.max(np.abs(X.u[:, top] - X.eta_t))) if X.u.size else 0.0
    w = evaluate_w(X)
    w[:, g.dirichlet_faces] = 0.0
    div = float(np.max(np.abs((X.u - w) @ g.div.T)))
    # the outflow value fed to the linear solve at iterate Y came from X
    theta_y = evaluate_theta(Y)
    theta_x = evaluate_theta(X)
    outflow = float(np.max(np.abs(theta_y - theta_x)))
    return {"fixed_point": float(fp), "interface": interface, "divergence": div,
            "outflow": outflow}
