"""Experiment configuration: a sectioned key = value text format.

The grammar is INI-style (stdlib configparser): sections [mesh],
[measurements], [pixels], [balls], [background], [contrast], [phantom],
[method], [solver]. Phantom shapes are lines like

    shape1 = disc 0.5 0.5 0.15 lambda=2.0 mu=2.0 rho=2.0
    shape2 = rect 0.6 0.6 0.85 0.85 mu=2.0
    shape3 = ellipse 0.3 0.7 0.16 0.1 lambda=2.0

Parsing then serializing then parsing reproduces the same configuration.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .phantoms import PARAM_NAMES, Phantom, PhantomShape
from .shapes import Disc, Ellipse, Rect

METHODS = ("mono_test", "constrained", "combined")


@dataclass
class ExperimentConfig:
    mesh_n: int = 51
    mesh_scheme: str = "right"
    data_mesh_n: int = 0  # 0: generate data on the inversion mesh
    m: int = 19
    noise_delta: float = 0.0
    noise_seed: int = 0
    pixels_nx: int = 10
    pixels_ny: int = 10
    balls_nx: int = 10
    balls_ny: int = 10
    ball_radius: float = 0.05
    lam0: float = 1.0
    mu0: float = 1.0
    rho0: float = 1.0
    lam1: float = 2.0
    mu1: float = 2.0
    rho1: float = 2.0
    phantom: Phantom = field(default_factory=lambda: default_phantom())
    method: str = "mono_test"
    disjoint: bool = False
    tsvd_tau: float = 0.99
    tsvd_criterion: str = "linear"
    tsvd_global: bool = False
    threshold_fraction: float = 0.5
    solver_tol: float = 1e-8
    solver_max_iter: int = 5000
    jobs: int = 1

    def validate(self) -> None:
        if self.mesh_n < 2:
            raise ConfigError("mesh.n must be at least 2")
        if self.mesh_scheme not in ("right", "crossed"):
            raise ConfigError(f"unknown mesh scheme {self.mesh_scheme!r}")
        if self.data_mesh_n and self.data_mesh_n < 2:
            raise ConfigError("mesh.data_n must be 0 or at least 2")
        if self.m < 1:
            raise ConfigError("measurements.m must be positive")
        if self.noise_delta < 0:
            raise ConfigError("noise level must be nonnegative")
        if min(self.pixels_nx, self.pixels_ny, self.balls_nx, self.balls_ny) < 1:
            raise ConfigError("grid sizes must be positive")
        if self.ball_radius <= 0:
            raise ConfigError("ball radius must be positive")
        physical = (self.lam0, self.mu0, self.rho0, self.lam1, self.mu1, self.rho1)
        if min(physical) <= 0:
            raise ConfigError("material values must be positive")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.tsvd_tau < 1.0:
            raise ConfigError("tsvd threshold must lie in (0,1)")
        if self.tsvd_criterion not in ("linear", "squared"):
            raise ConfigError(f"unknown tsvd criterion {self.tsvd_criterion!r}")
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ConfigError("threshold fraction must lie in (0,1)")
        if self.solver_tol <= 0 or self.solver_max_iter < 1:
            raise ConfigError("solver tolerance and iteration limit must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")


def default_phantom() -> Phantom:
    """Single disc perturbing all three parameters to value 2."""
    return Phantom([PhantomShape(Disc(0.5, 0.5, 0.15), {"lambda": 2.0, "mu": 2.0, "rho": 2.0})])


def default_disjoint_phantom() -> Phantom:
    """Ellipse perturbs λ, square perturbs μ, disc perturbs ρ."""
    return Phantom(
        [
            PhantomShape(Ellipse(0.3, 0.7, 0.16, 0.1), {"lambda": 2.0}),
            PhantomShape(Rect(0.6, 0.6, 0.85, 0.85), {"mu": 2.0}),
            PhantomShape(Disc(0.3, 0.3, 0.12), {"rho": 2.0}),
        ]
    )


def _parse_shape(text: str) -> PhantomShape:
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty phantom shape line")
    kind = tokens[0]
    geometry_counts = {"disc": 3, "rect": 4, "ellipse": 4}
    if kind not in geometry_counts:
        raise ConfigError(f"unknown shape kind {kind!r}")
    n_geo = geometry_counts[kind]
    if len(tokens) < 1 + n_geo:
        raise ConfigError(f"shape {kind!r} needs {n_geo} geometry values")
    try:
        geo = [float(t) for t in tokens[1 : 1 + n_geo]]
    except ValueError as exc:
        raise ConfigError(f"bad geometry in shape line {text!r}") from exc
    values = {}
    for tok in tokens[1 + n_geo :]:
        if "=" not in tok:
            raise ConfigError(f"expected param=value, got {tok!r}")
        key, _, val = tok.partition("=")
        if key not in PARAM_NAMES:
            raise ConfigError(f"unknown parameter {key!r} in shape line")
        try:
            values[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in shape line") from exc
    try:
        if kind == "disc":
            shape = Disc(*geo)
        elif kind == "rect":
            shape = Rect(*geo)
        else:
            shape = Ellipse(*geo)
        return PhantomShape(shape, values)
    except Exception as exc:
        raise ConfigError(f"invalid shape {text!r}: {exc}") from exc


def _format_shape(ps: PhantomShape) -> str:
    s = ps.shape
    if isinstance(s, Disc):
        geo = f"disc {s.cx!r} {s.cy!r} {s.radius!r}"
    elif isinstance(s, Rect):
        geo = f"rect {s.x0!r} {s.y0!r} {s.x1!r} {s.y1!r}"
    elif isinstance(s, Ellipse):
        geo = f"ellipse {s.cx!r} {s.cy!r} {s.rx!r} {s.ry!r}"
    else:
        raise ConfigError(f"cannot serialize shape {s!r}")
    vals = " ".join(f"{k}={ps.values[k]!r}" for k in PARAM_NAMES if k in ps.values)
    return f"{geo} {vals}".strip()


_SCHEMA = {
    "mesh": {"n": ("mesh_n", int), "scheme": ("mesh_scheme", str), "data_n": ("data_mesh_n", int)},
    "measurements": {
        "m": ("m", int),
        "noise_delta": ("noise_delta", float),
        "noise_seed": ("noise_seed", int),
    },
    "pixels": {"nx": ("pixels_nx", int), "ny": ("pixels_ny", int)},
    "balls": {
        "nx": ("balls_nx", int),
        "ny": ("balls_ny", int),
        "radius": ("ball_radius", float),
    },
    "background": {"lambda": ("lam0", float), "mu": ("mu0", float), "rho": ("rho0", float)},
    "contrast": {"lambda": ("lam1", float), "mu": ("mu1", float), "rho": ("rho1", float)},
    "method": {
        "name": ("method", str),
        "disjoint": ("disjoint", bool),
        "tsvd_tau": ("tsvd_tau", float),
        "tsvd_criterion": ("tsvd_criterion", str),
        "tsvd_global": ("tsvd_global", bool),
        "threshold": ("threshold_fraction", float),
    },
    "solver": {
        "tol": ("solver_tol", float),
        "max_iter": ("solver_max_iter", int),
        "jobs": ("jobs", int),
    },
}


def _coerce(raw: str, typ):
    if typ is bool:
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {typ.__name__}") from exc


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = ExperimentConfig(phantom=Phantom([]))
    for section, keys in _SCHEMA.items():
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            attr, typ = keys[key]
            setattr(cfg, attr, _coerce(raw, typ))
    shapes = []
    if cp.has_section("phantom"):
        def shape_order(key: str):
            suffix = key[len("shape"):]
            return int(suffix) if suffix.isdigit() else 0

        for key in sorted(cp.options("phantom"), key=shape_order):
            if not key.startswith("shape"):
                raise ConfigError(f"unknown key {key!r} in section [phantom]")
            shapes.append(_parse_shape(cp.get("phantom", key)))
    try:
        cfg.phantom = Phantom(shapes)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for section, keys in _SCHEMA.items():
        cp.add_section(section)
        for key, (attr, typ) in keys.items():
            value = getattr(cfg, attr)
            if typ is float:
                cp.set(section, key, repr(float(value)))
            elif typ is bool:
                cp.set(section, key, "true" if value else "false")
            else:
                cp.set(section, key, str(value))
    cp.add_section("phantom")
    for i, ps in enumerate(cfg.phantom.shapes, start=1):
        cp.set("phantom", f"shape{i}", _format_shape(ps))
    out = io.StringIO()
    cp.write(out)
    return out.getvalue()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def config_equal(a: ExperimentConfig, b: ExperimentConfig) -> bool:
    for f in fields(ExperimentConfig):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if f.name == "phantom":
            if va.describe() != vb.describe():
                return False
        elif va != vb:
            return False
    return True
