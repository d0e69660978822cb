"""Staggered (MAC) discretization of the channel ``(0, L) x (0, 1)``.

Layout
------
* pressure-like scalars live at cell centres, shape ``(nx, nz)``;
* ``u1`` lives on x-faces ``(i*dx, (j+1/2)*dz)``, shape ``(nx+1, nz)``;
* ``u2`` lives on z-faces ``((i+1/2)*dx, j*dz)``, shape ``(nx, nz+1)``;
* beam values live at the cell-centre abscissae ``(i+1/2)*dx`` on the top wall.

Boundary pieces: ``inflow`` (x=0), ``outflow`` (x=L), ``bottom`` (z=0) and
``top`` (z=1, where the beam sits).  Faces whose normal velocity sits on the
inflow, bottom or top wall are the *Dirichlet faces*; every other face is
*free*.

All discrete operators are sparse matrices acting on flattened fields.  A
flattened velocity is ``concatenate([u1.ravel(), u2.ravel()])``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

SIDES = ("inflow", "outflow", "bottom", "top")
LOCATIONS = ("center", "x-face", "z-face", "node", "beam")


class Grid2D:
    """Uniform MAC grid on ``(0, length) x (0, 1)``."""

    def __init__(self, nx: int, nz: int, length: float = 1.0):
        if int(nx) != nx or int(nz) != nz:
            raise ValueError("cell counts must be integers")
        if nx < 4 or nz < 4:
            raise ValueError(f"need nx >= 4 and nz >= 4, got nx={nx}, nz={nz}")
        if not length > 0:
            raise ValueError(f"length must be positive, got {length}")
        self.nx = int(nx)
        self.nz = int(nz)
        self.length = float(length)
        self.dx = self.length / self.nx
        self.dz = 1.0 / self.nz

    def __repr__(self):
        return f"Grid2D(nx={self.nx}, nz={self.nz}, length={self.length!r})"

    def __eq__(self, other):
        return (isinstance(other, Grid2D) and self.nx == other.nx
                and self.nz == other.nz and self.length == other.length)

    def __hash__(self):
        return hash((self.nx, self.nz, self.length))

    # ------------------------------------------------------------------
    # coordinates and sizes
    @cached_property
    def x_nodes(self):
        return np.linspace(0.0, self.length, self.nx + 1)

    @cached_property
    def z_nodes(self):
        return np.linspace(0.0, 1.0, self.nz + 1)

    @cached_property
    def x_centers(self):
        return (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def z_centers(self):
        return (np.arange(self.nz) + 0.5) * self.dz

    @property
    def n_u1(self):
        return (self.nx + 1) * self.nz

    @property
    def n_u2(self):
        return self.nx * (self.nz + 1)

    @property
    def n_faces(self):
        return self.n_u1 + self.n_u2

    @property
    def n_cells(self):
        return self.nx * self.nz

    @property
    def n_beam(self):
        return self.nx

    def shape(self, location: str):
        return {
            "center": (self.nx, self.nz),
            "x-face": (self.nx + 1, self.nz),
            "z-face": (self.nx, self.nz + 1),
            "node": (self.nx + 1, self.nz + 1),
            "beam": (self.nx,),
        }[location]

    def coordinates(self, location: str):
        """Return ``(X, Z)`` arrays (``ij`` indexing) of the given sites."""
        if location == "beam":
            return self.x_centers, np.ones(self.nx)
        xs = {"center": self.x_centers, "x-face": self.x_nodes,
              "z-face": self.x_centers, "node": self.x_nodes}[location]
        zs = {"center": self.z_centers, "x-face": self.z_centers,
              "z-face": self.z_nodes, "node": self.z_nodes}[location]
        return np.meshgrid(xs, zs, indexing="ij")

    # ------------------------------------------------------------------
    # indexing
    def u1_index(self, i, j):
        return np.asarray(i) * self.nz + np.asarray(j)

    def u2_index(self, i, j):
        return self.n_u1 + np.asarray(i) * (self.nz + 1) + np.asarray(j)

    def cell_index(self, i, j):
        return np.asarray(i) * self.nz + np.asarray(j)

    @cached_property
    def boundary_faces(self):
        """Flat face indices carrying the normal velocity on each side."""
        j = np.arange(self.nz)
        i = np.arange(self.nx)
        return {
            "inflow": self.u1_index(0, j),
            "outflow": self.u1_index(self.nx, j),
            "bottom": self.u2_index(i, 0),
            "top": self.u2_index(i, self.nz),
        }

    @cached_property
    def dirichlet_faces(self):
        b = self.boundary_faces
        return np.sort(np.concatenate([b["inflow"], b["bottom"], b["top"]]))

    @cached_property
    def free_faces(self):
        mask = np.ones(self.n_faces, dtype=bool)
        mask[self.dirichlet_faces] = False
        return np.flatnonzero(mask)

    @cached_property
    def top_cells(self):
        return self.cell_index(np.arange(self.nx), self.nz - 1)

    # ------------------------------------------------------------------
    # quadrature weights
    @cached_property
    def face_weights(self):
        """Control-volume areas; boundary-normal faces carry half a cell."""
        w1 = np.full((self.nx + 1, self.nz), self.dx * self.dz)
        w1[0, :] *= 0.5
        w1[-1, :] *= 0.5
        w2 = np.full((self.nx, self.nz + 1), self.dx * self.dz)
        w2[:, 0] *= 0.5
        w2[:, -1] *= 0.5
        return np.concatenate([w1.ravel(), w2.ravel()])

    @property
    def cell_weight(self):
        return self.dx * self.dz

    @cached_property
    def node_weights(self):
        wx = np.full(self.nx + 1, self.dx)
        wx[[0, -1]] *= 0.5
        wz = np.full(self.nz + 1, self.dz)
        wz[[0, -1]] *= 0.5
        return np.outer(wx, wz).ravel()

    # ------------------------------------------------------------------
    # sparse calculus
    @cached_property
    def div(self) -> sp.csr_matrix:
        """Cell-centred divergence of a flattened face field."""
        nx, nz = self.nx, self.nz
        I, J = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        c = self.cell_index(I, J).ravel()
        rows = np.concatenate([c, c, c, c])
        cols = np.concatenate([
            self.u1_index(I + 1, J).ravel(), self.u1_index(I, J).ravel(),
            self.u2_index(I, J + 1).ravel(), self.u2_index(I, J).ravel()])
        vals = np.concatenate([
            np.full(c.size, 1 / self.dx), np.full(c.size, -1 / self.dx),
            np.full(c.size, 1 / self.dz), np.full(c.size, -1 / self.dz)])
        return sp.csr_matrix((vals, (rows, cols)),
                             shape=(self.n_cells, self.n_faces))

    def gradient_matrix(self, inflow="dirichlet", outflow="dirichlet",
                        bottom="dirichlet", top="dirichlet") -> sp.csr_matrix:
        """Face gradient of a cell field.

        On each side the boundary face row is either a half-cell difference
        against a zero boundary value (``"dirichlet"``) or empty
        (``"neumann"``, zero normal flux).  Boundary data enter separately
        through :meth:`boundary_gradient`.
        """
        kinds = dict(inflow=inflow, outflow=outflow, bottom=bottom, top=top)
        for side, kind in kinds.items():
            if kind not in ("dirichlet", "neumann"):
                raise ValueError(f"unknown closure {kind!r} on {side}")
        nx, nz, dx, dz = self.nx, self.nz, self.dx, self.dz
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(np.ravel(r))
            cols.append(np.ravel(c))
            vals.append(np.broadcast_to(v, np.shape(np.ravel(r))).astype(float))

        # interior x-faces
        I, J = np.meshgrid(np.arange(1, nx), np.arange(nz), indexing="ij")
        f = self.u1_index(I, J)
        add(f, self.cell_index(I, J), 1 / dx)
        add(f, self.cell_index(I - 1, J), -1 / dx)
        # interior z-faces
        I, J = np.meshgrid(np.arange(nx), np.arange(1, nz), indexing="ij")
        f = self.u2_index(I, J)
        add(f, self.cell_index(I, J), 1 / dz)
        add(f, self.cell_index(I, J - 1), -1 / dz)
        j = np.arange(nz)
        i = np.arange(nx)
        if inflow == "dirichlet":
            add(self.u1_index(0, j), self.cell_index(0, j), 2 / dx)
        if outflow == "dirichlet":
            add(self.u1_index(nx, j), self.cell_index(nx - 1, j), -2 / dx)
        if bottom == "dirichlet":
            add(self.u2_index(i, 0), self.cell_index(i, 0), 2 / dz)
        if top == "dirichlet":
            add(self.u2_index(i, nz), self.cell_index(i, nz - 1), -2 / dz)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_faces, self.n_cells))

    def boundary_gradient(self, side: str, values) -> np.ndarray:
        """Face-gradient contribution of Dirichlet data ``values`` on ``side``."""
        out = np.zeros(self.n_faces)
        values = np.asarray(values, dtype=float)
        h = {"inflow": self.dx, "outflow": self.dx,
             "bottom": self.dz, "top": self.dz}[side]
        sign = -1.0 if side in ("inflow", "bottom") else 1.0
        out[self.boundary_faces[side]] = sign * values / (h / 2)
        return out

    @cached_property
    def grad_mixed(self):
        """Gradient with zero value on the outflow and zero flux on the walls."""
        return self.gradient_matrix(inflow="neumann", outflow="dirichlet",
                                    bottom="neumann", top="neumann")

    @cached_property
    def grad_dirichlet(self):
        return self.gradient_matrix()

    @cached_property
    def lap_mixed(self):
        return (self.div @ self.grad_mixed).tocsc()

    @cached_property
    def lap_dirichlet(self):
        return (self.div @ self.grad_dirichlet).tocsc()

    # ------------------------------------------------------------------
    # viscous energy  sum_k w_k (R u - c)_k^2
    @cached_property
    def _viscous_terms(self):
        """Difference rows ``R``, weights and a map from wall data to offsets.

        Returns ``(R, weights, tangential)`` where ``tangential[side]`` gives the
        row indices whose offset is the tangential wall velocity on ``side``
        (ordered along the wall) together with the sign of the data term.
        """
        nx, nz, dx, dz = self.nx, self.nz, self.dx, self.dz
        rows, cols, vals, weights = [], [], [], []
        tangential = {}
        count = 0

        def block(fp, fm, coef, w):
            nonlocal count
            fp = np.ravel(fp)
            n = fp.size
            r = np.arange(count, count + n)
            if fm is not None:
                rows.extend([r, r])
                cols.extend([fp, np.ravel(fm)])
                vals.extend([np.full(n, coef), np.full(n, -coef)])
            else:
                rows.append(r)
                cols.append(fp)
                vals.append(np.full(n, coef))
            weights.append(np.broadcast_to(w, (n,)).astype(float).ravel())
            count += n
            return r

        wx = np.full(nx + 1, dx)
        wx[[0, -1]] *= 0.5
        # u1: d/dx at cell centres
        I, J = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        block(self.u1_index(I + 1, J), self.u1_index(I, J), 1 / dx, dx * dz)
        # u1: d/dz between interior rows
        I, J = np.meshgrid(np.arange(nx + 1), np.arange(nz - 1), indexing="ij")
        block(self.u1_index(I, J + 1), self.u1_index(I, J), 1 / dz,
              (wx[:, None] * dz * np.ones((1, nz - 1))).ravel())
        # u1: walls z=0 and z=1, half-cell against the tangential wall value
        i1 = np.arange(nx + 1)
        r = block(self.u1_index(i1, 0), None, 2 / dz, wx * dz / 2)
        tangential["bottom"] = (r, 2 / dz)
        r = block(self.u1_index(i1, nz - 1), None, -2 / dz, wx * dz / 2)
        tangential["top"] = (r, -2 / dz)
        # u2: d/dz at cell centres
        I, J = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        block(self.u2_index(I, J + 1), self.u2_index(I, J), 1 / dz, dx * dz)
        # u2: d/dx between interior columns, interior rows only
        I, J = np.meshgrid(np.arange(nx - 1), np.arange(1, nz), indexing="ij")
        block(self.u2_index(I + 1, J), self.u2_index(I, J), 1 / dx, dx * dz)
        # u2: walls x=0 and x=L
        j1 = np.arange(1, nz)
        r = block(self.u2_index(0, j1), None, 2 / dx, dx / 2 * dz)
        tangential["inflow"] = (r, 2 / dx)
        r = block(self.u2_index(nx - 1, j1), None, -2 / dx, dx / 2 * dz)
        tangential["outflow"] = (r, -2 / dx)
        R = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(count, self.n_faces))
        return R, np.concatenate(weights), tangential

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric matrix ``K`` with ``u.K.u ~ int |grad u|^2`` (zero wall slip)."""
        R, w, _ = self._viscous_terms
        return (R.T @ sp.diags(w) @ R).tocsr()

    def tangential_load(self, inflow=None, top=None, bottom=None, outflow=None):
        """Vector ``b`` such that the energy with wall data is ``u.K.u - 2 b.u + c``.

        ``inflow``/``outflow`` give ``u2`` at the interior z-nodes of the
        vertical walls (length ``nz-1``); ``bottom``/``top`` give ``u1`` at the
        x-nodes (length ``nx+1``).
        """
        R, w, tang = self._viscous_terms
        c = np.zeros(R.shape[0])
        for side, data in (("inflow", inflow), ("outflow", outflow),
                           ("bottom", bottom), ("top", top)):
            if data is None:
                continue
            r, coef = tang[side]
            # residual of a wall row is coef*(u - data)
            c[r] = coef * np.asarray(data, dtype=float)
        return R.T @ (w * c)

    # ------------------------------------------------------------------
    def check_same(self, other: "Grid2D"):
        if other != self:
            raise ValueError(f"grid mismatch: {self!r} vs {other!r}")


# ----------------------------------------------------------------------
# fields
@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray
    location: str = "center"

    def __post_init__(self):
        if self.location not in LOCATIONS:
            raise ValueError(f"unknown staggering {self.location!r}")
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape(self.location)
        if self.values.size == int(np.prod(expected)):
            self.values = self.values.reshape(expected)
        else:
            raise ValueError(
                f"{self.location} field needs shape {expected}, got {self.values.shape}")

    @classmethod
    def from_function(cls, grid, fun, location="center"):
        X, Z = grid.coordinates(location)
        return cls(grid, fun(X, Z) * np.ones_like(X), location)

    @property
    def flat(self):
        return self.values.ravel()

    def __add__(self, other):
        _check_scalar_pair(self, other)
        return ScalarField(self.grid, self.values + other.values, self.location)

    def __sub__(self, other):
        _check_scalar_pair(self, other)
        return ScalarField(self.grid, self.values - other.values, self.location)

    def __mul__(self, a):
        return ScalarField(self.grid, a * self.values, self.location)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.location)


def _check_scalar_pair(a, b):
    if not isinstance(b, ScalarField):
        raise TypeError("expected a ScalarField")
    a.grid.check_same(b.grid)
    if a.location != b.location:
        raise ValueError(f"staggering mismatch: {a.location} vs {b.location}")


@dataclass
class VectorField:
    """Face-staggered velocity: ``u1`` on x-faces, ``u2`` on z-faces."""

    grid: Grid2D
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        g = self.grid
        self.u1 = np.asarray(self.u1, dtype=float).reshape(g.nx + 1, g.nz)
        self.u2 = np.asarray(self.u2, dtype=float).reshape(g.nx, g.nz + 1)

    @classmethod
    def from_flat(cls, grid, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (grid.n_faces,):
            raise ValueError(f"expected {grid.n_faces} face values, got {flat.shape}")
        return cls(grid, flat[:grid.n_u1], flat[grid.n_u1:])

    @classmethod
    def zeros(cls, grid):
        return cls.from_flat(grid, np.zeros(grid.n_faces))

    @classmethod
    def from_function(cls, grid, f1, f2):
        X1, Z1 = grid.coordinates("x-face")
        X2, Z2 = grid.coordinates("z-face")
        return cls(grid, f1(X1, Z1) * np.ones_like(X1), f2(X2, Z2) * np.ones_like(X2))

    @property
    def flat(self):
        return np.concatenate([self.u1.ravel(), self.u2.ravel()])

    def _pair(self, other):
        if not isinstance(other, VectorField):
            raise TypeError("expected a VectorField")
        self.grid.check_same(other.grid)

    def __add__(self, other):
        self._pair(other)
        return VectorField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        self._pair(other)
        return VectorField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, a):
        return VectorField(self.grid, a * self.u1, a * self.u2)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.u1, -self.u2)

    def normal_trace(self, side):
        """Outward normal velocity on one boundary piece."""
        if side == "inflow":
            return -self.u1[0, :]
        if side == "outflow":
            return self.u1[-1, :]
        if side == "bottom":
            return -self.u2[:, 0]
        if side == "top":
            return self.u2[:, -1]
        raise ValueError(f"unknown side {side!r}")


# ----------------------------------------------------------------------
# operations
def _require_vector(v, grid=None):
    if not isinstance(v, VectorField):
        raise TypeError("expected a face-staggered VectorField")
    if grid is not None:
        grid.check_same(v.grid)


def _require_center(p):
    if not isinstance(p, ScalarField) or p.location != "center":
        raise TypeError("expected a cell-centred ScalarField")


def divergence(v: VectorField) -> ScalarField:
    _require_vector(v)
    g = v.grid
    return ScalarField(g, g.div @ v.flat, "center")


def gradient(p: ScalarField, boundary: str = "extrapolate") -> VectorField:
    """Face gradient of a cell-centred field.

    ``boundary`` picks the boundary-face rows: ``"extrapolate"`` copies the
    neighbouring interior difference (exact for linear fields),
    ``"dirichlet"`` differences against a zero wall value and ``"neumann"``
    leaves them at zero.
    """
    _require_center(p)
    g = p.grid
    if boundary in ("dirichlet", "neumann"):
        return VectorField.from_flat(
            g, g.gradient_matrix(*(boundary,) * 4) @ p.flat)
    if boundary != "extrapolate":
        raise ValueError(f"unknown boundary rule {boundary!r}")
    v = VectorField.from_flat(g, g.gradient_matrix(*("neumann",) * 4) @ p.flat)
    v.u1[0, :] = v.u1[1, :]
    v.u1[-1, :] = v.u1[-2, :]
    v.u2[:, 0] = v.u2[:, 1]
    v.u2[:, -1] = v.u2[:, -2]
    return v


def laplacian(p: ScalarField, bc="dirichlet") -> ScalarField:
    """Five-point Laplacian with homogeneous closures.

    ``bc`` is ``"dirichlet"``, ``"neumann"``, ``"mixed"`` (zero on the
    outflow, zero flux elsewhere) or a dict ``side -> kind``.
    """
    _require_center(p)
    g = p.grid
    if bc == "mixed":
        sides = dict(inflow="neumann", outflow="dirichlet", bottom="neumann", top="neumann")
    elif isinstance(bc, str):
        sides = {s: bc for s in SIDES}
    else:
        sides = {s: bc.get(s, "dirichlet") for s in SIDES}
    G = g.gradient_matrix(**sides)
    return ScalarField(g, g.div @ (G @ p.flat), "center")


def inner_product(a, b, kind: str = "l2") -> float:
    """Discrete ``L2`` or ``H1`` pairing of two matching fields.

    Beam pairings live in :mod:`periodic_fsi.beam`.
    """
    if isinstance(a, VectorField):
        a._pair(b)
        g = a.grid
        if kind == "l2":
            return float(np.dot(g.face_weights * a.flat, b.flat))
        if kind == "h1":
            return float(a.flat @ (g.stiffness @ b.flat))
        raise ValueError(f"unknown pairing {kind!r}")
    if isinstance(a, ScalarField):
        _check_scalar_pair(a, b)
        g = a.grid
        if kind == "l2":
            if a.location == "center":
                return float(g.cell_weight * np.dot(a.flat, b.flat))
            if a.location == "node":
                return float(np.dot(g.node_weights * a.flat, b.flat))
            if a.location == "x-face":
                return float(np.dot(g.face_weights[:g.n_u1] * a.flat, b.flat))
            if a.location == "z-face":
                return float(np.dot(g.face_weights[g.n_u1:] * a.flat, b.flat))
            return float(g.dx * np.dot(a.flat, b.flat))
        if kind == "h1" and a.location == "center":
            G = g.gradient_matrix(*("neumann",) * 4)
            ga, gb = G @ a.flat, G @ b.flat
            return float(np.dot(g.face_weights * ga, gb))
        raise ValueError(f"unknown pairing {kind!r} for {a.location} fields")
    raise TypeError(f"cannot pair {type(a).__name__}")


def norm(a, kind: str = "l2") -> float:
    return float(np.sqrt(max(inner_product(a, a, kind), 0.0)))


# ----------------------------------------------------------------------
# CSV field dumps
def dump_field(field_, path, location=None):
    """Write ``# nx nz L staggering`` then ``i,j,x,z,value`` rows."""
    if isinstance(field_, VectorField):
        raise TypeError("dump each component: ScalarField(grid, v.u1, 'x-face')")
    g = field_.grid
    loc = field_.location if location is None else location
    X, Z = g.coordinates(loc)
    vals = field_.values
    with open(path, "w") as fh:
        fh.write(f"# {g.nx} {g.nz} {g.length!r} {loc}\n")
        if loc == "beam":
            for i in range(vals.size):
                fh.write(f"{i},0,{X[i]!r},{1.0!r},{float(vals[i])!r}\n")
            return
        for i in range(vals.shape[0]):
            for j in range(vals.shape[1]):
                fh.write(f"{i},{j},{float(X[i, j])!r},{float(Z[i, j])!r},"
                         f"{float(vals[i, j])!r}\n")


def load_field(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "#":
            raise ValueError(f"{path}: missing field header")
        nx, nz, length, loc = int(header[1]), int(header[2]), float(header[3]), header[4]
        grid = Grid2D(nx, nz, length)
        values = np.zeros(grid.shape(loc))
        for line in fh:
            i, j, _, _, val = line.strip().split(",")
            if loc == "beam":
                values[int(i)] = float(val)
            else:
                values[int(i), int(j)] = float(val)
    return ScalarField(grid, values, loc)
