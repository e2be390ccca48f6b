"""TOML run configuration with strict key checking."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import tomli


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeshConfig:
    length: float = 0.20
    width: float = 0.04
    height: float = 0.10
    cells: tuple = (6, 2, 3)
    file: str = ""


@dataclass(frozen=True)
class MaterialConfig:
    youngs_modulus: float = 2.0e5
    poisson_ratio: float = 0.45
    density: float = 1000.0


@dataclass(frozen=True)
class FluidConfig:
    density: float = 1000.0


@dataclass(frozen=True)
class DampingConfig:
    rayleigh: tuple = (0.0, 0.01)


@dataclass(frozen=True)
class ActuationConfig:
    stiffness: float = 5.0e4
    amplitude: float = 0.2
    frequency: float = 1.0


@dataclass(frozen=True)
class ShapeConfig:
    preset: str = "SO1"
    fields: tuple = ()
    bounds: tuple = ()


@dataclass(frozen=True)
class RobConfig:
    n_modes: int = 1
    static_md: bool = False


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.02
    horizon: float = 2.0
    beta: float = 0.25
    gamma: float = 0.5
    newton_tol: float = 1e-8
    max_iters: int = 25


@dataclass(frozen=True)
class OptimizerConfig:
    gamma: float = 1.0
    weights: tuple = ()
    mu: float = -1.0               # negative: 1e-4 |L0|
    mu_decay: float = 0.5
    tau: float = 0.1
    tol: float = 1e-6
    window: tuple = (96, 101)
    max_rebuilds: int = 10
    max_inner: int = 10


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    material: MaterialConfig = field(default_factory=MaterialConfig)
    fluid: FluidConfig = field(default_factory=FluidConfig)
    damping: DampingConfig = field(default_factory=DampingConfig)
    actuation: ActuationConfig = field(default_factory=ActuationConfig)
    shape: ShapeConfig = field(default_factory=ShapeConfig)
    rob: RobConfig = field(default_factory=RobConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def validate(self):
        pos = {"mesh.length": self.mesh.length, "mesh.width": self.mesh.width, "mesh.height": self.mesh.height,
               "material.youngs_modulus": self.material.youngs_modulus, "material.density": self.material.density,
               "fluid.density": self.fluid.density, "actuation.stiffness": self.actuation.stiffness,
               "actuation.frequency": self.actuation.frequency, "integrator.dt": self.integrator.dt,
               "integrator.horizon": self.integrator.horizon, "optimizer.tau": self.optimizer.tau,
               "optimizer.gamma": self.optimizer.gamma}
        for k, v in pos.items():
            if not v > 0:
                raise ConfigError(f"{k} must be positive (got {v})")
        if self.actuation.amplitude < 0:
            raise ConfigError("actuation.amplitude must be non-negative")
        if len(self.mesh.cells) != 3 or min(self.mesh.cells) < 1:
            raise ConfigError("mesh.cells must be three positive integers")
        for lo, hi in self.shape.bounds:
            if not lo < hi:
                raise ConfigError(f"shape.bounds entry ({lo}, {hi}) is not ordered")
        if self.shape.bounds and len(self.shape.bounds) != len(self.shape.fields):
            raise ConfigError("shape.bounds must have one entry per shape field")
        n, N = self.optimizer.window
        steps = int(round(self.integrator.horizon / self.integrator.dt))
        if not (1 <= n < N <= steps + 1):
            raise ConfigError(f"optimizer.window ({n}, {N}) inconsistent with {steps} time steps")
        return self


def _tuple(v):
    return tuple(_tuple(x) for x in v) if isinstance(v, list) else v


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for k, v in data.items():
        if k not in known:
            raise ConfigError(f"unknown key {name}.{k}")
        default = getattr(cls(), k)
        v = _tuple(v)
        if isinstance(default, bool) and not isinstance(v, bool):
            raise ConfigError(f"{name}.{k} must be a boolean")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name}.{k} must be a number")
            if isinstance(default, int) and not float(v).is_integer():
                raise ConfigError(f"{name}.{k} must be an integer")
            v = type(default)(v)
        if isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(f"{name}.{k} must be a string")
        if isinstance(default, tuple) and not isinstance(v, tuple):
            raise ConfigError(f"{name}.{k} must be an array")
        kwargs[k] = v
    return cls(**kwargs)


def parse_config(text):
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    top = {f.name: f for f in fields(RunConfig)}
    kwargs = {}
    for k, v in raw.items():
        if k not in top:
            raise ConfigError(f"unknown section [{k}]")
        kwargs[k] = _section(type(getattr(RunConfig(), k)), v, k)
    return RunConfig(**kwargs).validate()


def load_config(path=None):
    if path is None:
        return RunConfig().validate()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def with_overrides(config, **sections):
    """Copy of ``config`` with fields replaced per section, e.g. ``actuation={"amplitude": 0}``."""
    kw = {name: replace(getattr(config, name), **vals) for name, vals in sections.items()}
    return replace(config, **kw).validate()
