"""Run configuration: INI file with sections, validated into a dataclass.

Example::

    [domain]
    length = 2.0

    [fluid]
    nu = 0.1

    [beam]
    alpha = 1.0
    beta = 0.0
    gamma = 0.5

    [discretization]
    nx = 48
    nz = 24
    n_t = 64
    theta = 0.5

    [forcing]
    period = 1.0
    omega1_amplitude = 0.0
    omega1_sin = 1.0
    omega2_amplitude = 1e-3
    omega2_sin = 1.0
    omega2_profile = sin

Lists (``*_cos``, ``*_sin``, ``sweep.amplitudes``) are comma separated.
Overrides use ``section.key=value``.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .beam import BeamParams
from .errors import ConfigError
from .grid import Grid2D
from .periodic import FourierSeries, PeriodicForcing, default_inflow_profile
from .stokes import InflowProfile

SECTIONS = {
    "domain": ("length",),
    "fluid": ("nu",),
    "beam": ("alpha", "beta", "gamma", "beam_nodes"),
    "discretization": ("nx", "nz", "n_t", "theta"),
    "forcing": ("period", "omega1_amplitude", "omega1_cos", "omega1_sin", "omega1_profile",
                "omega2_amplitude", "omega2_cos", "omega2_sin", "omega2_profile"),
    "tolerances": ("elliptic", "krylov", "picard", "defect", "spectral_margin"),
    "ball": ("mu", "radius", "allow_large"),
    "run": ("seed", "picard_max_iter", "eig_count"),
    "sweep": ("parameter", "values"),
}


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.split(","))


@dataclass
class SolverConfig:
    length: float = 2.0
    nu: float = 0.1
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.5
    beam_nodes: int | None = None
    nx: int = 48
    nz: int = 24
    n_t: int = 64
    theta: float = 0.5
    period: float = 1.0
    omega1_amplitude: float = 0.0
    omega1_cos: tuple = ()
    omega1_sin: tuple = (1.0,)
    omega1_profile: str = "bubble"
    omega2_amplitude: float = 1e-3
    omega2_cos: tuple = ()
    omega2_sin: tuple = (1.0,)
    omega2_profile: str = "sin"
    elliptic: float = 1e-12
    krylov: float = 1e-12
    picard: float = 1e-8
    defect: float = 1e-7
    spectral_margin: float = 1e-6
    mu: float = 2.0
    radius: float = 1.0
    allow_large: bool = False
    seed: int = 0
    picard_max_iter: int = 30
    eig_count: int = 20
    parameter: str = "omega2_amplitude"
    values: tuple = (2.5e-4, 5e-4, 1e-3, 2e-3)

    def validate(self):
        bad = []
        if not self.length > 0:
            bad.append(f"domain.length must be > 0 (got {self.length})")
        for name in ("nu", "alpha", "gamma"):
            if not getattr(self, name) > 0:
                bad.append(f"{name} must be > 0 (got {getattr(self, name)})")
        if not self.beta >= 0:
            bad.append(f"beta must be >= 0 (got {self.beta})")
        for name in ("nx", "nz", "n_t"):
            if int(getattr(self, name)) < 4:
                bad.append(f"{name} must be >= 4 (got {getattr(self, name)})")
        if self.beam_nodes is not None and int(self.beam_nodes) != int(self.nx):
            bad.append(f"beam_nodes must equal nx (beam nodes sit at the cell centres); "
                       f"got {self.beam_nodes} vs nx={self.nx}")
        if not 0.5 <= self.theta <= 1.0:
            bad.append(f"theta must lie in [0.5, 1] (got {self.theta})")
        if not self.period > 0:
            bad.append(f"period must be > 0 (got {self.period})")
        if self.omega1_profile not in ("bubble", "parabola"):
            bad.append(f"omega1_profile must be 'bubble' or 'parabola' "
                       f"(profiles vanishing at z=0 and z=1); got {self.omega1_profile!r}")
        if self.omega2_profile not in ("sin", "constant"):
            bad.append(f"omega2_profile must be 'sin' or 'constant' (got {self.omega2_profile!r})")
        for name in ("elliptic", "krylov", "picard", "defect", "spectral_margin"):
            if not getattr(self, name) > 0:
                bad.append(f"tolerances.{name} must be > 0")
        if not self.mu > 1:
            bad.append(f"mu must be > 1 (got {self.mu})")
        if not self.radius > 0:
            bad.append(f"radius must be > 0 (got {self.radius})")
        if int(self.picard_max_iter) < 1:
            bad.append("picard_max_iter must be >= 1")
        if bad:
            raise ConfigError(bad)
        return self

    # ------------------------------------------------------------------
    def grid(self) -> Grid2D:
        return Grid2D(self.nx, self.nz, self.length)

    def beam_params(self) -> BeamParams:
        return BeamParams(self.alpha, self.beta, self.gamma, self.nu)

    def forcing(self, grid: Grid2D | None = None, scale: float = 1.0) -> PeriodicForcing:
        grid = self.grid() if grid is None else grid
        if self.omega1_profile == "bubble":
            prof1 = default_inflow_profile(grid)
        else:
            prof1 = InflowProfile.from_function(grid, lambda z: z * (1 - z))
        if self.omega2_profile == "sin":
            prof2 = np.sin(np.pi * grid.z_centers)
        else:
            prof2 = np.ones(grid.nz)
        a1 = scale * self.omega1_amplitude
        a2 = scale * self.omega2_amplitude
        t1 = FourierSeries(self.period, 0.0, tuple(a1 * c for c in self.omega1_cos),
                           tuple(a1 * s for s in self.omega1_sin))
        t2 = FourierSeries(self.period, 0.0, tuple(a2 * c for c in self.omega2_cos),
                           tuple(a2 * s for s in self.omega2_sin))
        return PeriodicForcing(self.period, prof1, t1, prof2, t2)

    def as_dict(self):
        return asdict(self)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        data = self.as_dict()
        for section, keys in SECTIONS.items():
            cp[section] = {}
            for key in keys:
                val = data[key]
                if val is None:
                    continue
                if isinstance(val, tuple):
                    val = ",".join(repr(float(v)) for v in val)
                cp[section][key] = str(val)
        import io
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_TYPES = {f.name: f.type for f in fields(SolverConfig)}


def _convert(key, raw):
    default = getattr(SolverConfig, key, None)
    if key in ("omega1_cos", "omega1_sin", "omega2_cos", "omega2_sin", "values"):
        return _floats(raw)
    if key in ("omega1_profile", "omega2_profile", "parameter"):
        return str(raw).strip()
    if key == "allow_large":
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if key in ("nx", "nz", "n_t", "seed", "picard_max_iter", "eig_count", "beam_nodes"):
        return int(raw)
    return float(raw)


def load_config(path=None, overrides=()) -> SolverConfig:
    """Read an INI file (optional), apply ``section.key=value`` overrides, validate."""
    values = {}
    problems = []
    known = {k: s for s, keys in SECTIONS.items() for k in keys}
    if path is not None:
        cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
        for section in cp.sections():
            if section not in SECTIONS:
                problems.append(f"unknown section [{section}]")
                continue
            for key, raw in cp[section].items():
                if key not in SECTIONS[section]:
                    problems.append(f"unknown key {section}.{key}")
                    continue
                values[key] = raw
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r} is not key=value")
            continue
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, key = key.split(".", 1)
            if section not in SECTIONS or key not in SECTIONS[section]:
                problems.append(f"unknown override key {section}.{key}")
                continue
        elif key not in known:
            problems.append(f"unknown override key {key}")
            continue
        values[key] = raw
    converted = {}
    for key, raw in values.items():
        try:
            converted[key] = _convert(key, raw)
        except ValueError:
            problems.append(f"{known[key]}.{key}: cannot parse {raw!r}")
    if problems:
        raise ConfigError(problems)
    return SolverConfig(**converted).validate()
