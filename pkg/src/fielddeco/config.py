"""JSON experiment configuration.

Inputs are the dimensionless ratios gamma/omega, sigma_g^2 L, sigma_x/L and
v/(L omega); internally hbar = omega = L = mass density = 1. Complex numbers
are written as ``[re, im]`` and may also be given as strings such as ``"2+2j"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from .decoherence import RateContext
from .model import CatStateSpec, FieldModel, NoiseModel

__all__ = ["ConfigError", "ExperimentConfig", "COMMANDS", "load_config", "parse_config", "dump_config"]

COMMANDS = ("purity-decay", "initial-rate", "energy", "kernels", "qmc-selftest")

DEFAULT_SEPARATIONS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.7, 2.0,
                    2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 7.0, 8.0)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    gamma_over_omega: float = 1.0
    sigma_g_sq_L: float = 0.32
    sigma_x_over_L: float = 1.0
    v_over_L_omega: float = 0.01
    n_modes: int = 32
    alpha: complex = 2 + 2j
    beta: complex = -2 - 2j
    gamma_t: tuple = tuple(20.0 * i / 19 for i in range(20))
    offsets: tuple = (8.0, 4.0, 0.0)
    separations: tuple = DEFAULT_SEPARATIONS
    kernel_times: tuple = (0.0, 0.5, 1.0)
    selftest_points: tuple = (4096, 16384, 65536)
    n_points: int = 65536
    seed: int = 1
    x_nodes: int | None = None
    t_nodes_per_period: int = 8

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        for name in ("gamma_over_omega", "v_over_L_omega"):
            _ratio(self, name, allow_zero=True)
        for name in ("sigma_g_sq_L", "sigma_x_over_L"):
            _ratio(self, name, allow_zero=False)
        for name in ("n_modes", "n_points", "seed", "t_nodes_per_period"):
            object.__setattr__(self, name, _integer(name, getattr(self, name)))
        if self.x_nodes is not None:
            object.__setattr__(self, "x_nodes", _integer("x_nodes", self.x_nodes))
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.n_points < 8:
            raise ConfigError("n_points must be at least 8")
        object.__setattr__(self, "alpha", _complex("alpha", self.alpha))
        object.__setattr__(self, "beta", _complex("beta", self.beta))
        for name in ("gamma_t", "separations", "kernel_times"):
            object.__setattr__(self, name, _grid(name, getattr(self, name)))
        object.__setattr__(self, "offsets", tuple(float(v) for v in self.offsets))
        pts = tuple(_integer("selftest_points", v) for v in self.selftest_points)
        if not pts or min(pts) < 8:
            raise ConfigError("selftest_points must be integers >= 8")
        object.__setattr__(self, "selftest_points", pts)

    # -- derived physical objects
    def model(self) -> FieldModel:
        return FieldModel(speed=self.v_over_L_omega, n_modes=self.n_modes)

    def noise(self) -> NoiseModel:
        return NoiseModel(gamma=self.gamma_over_omega, sigma_g_sq=self.sigma_g_sq_L,
                          sigma_x=self.sigma_x_over_L)

    def context(self) -> RateContext:
        return RateContext.build(self.model(), self.noise(), x_nodes=self.x_nodes,
                                 t_nodes_per_period=self.t_nodes_per_period)

    def state(self) -> CatStateSpec:
        return CatStateSpec(self.alpha, self.beta)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("alpha", "beta"):
            out[key] = [out[key].real, out[key].imag]
        for key, val in out.items():
            if isinstance(val, tuple):
                out[key] = list(val)
        return out


def _ratio(cfg, name, allow_zero):
    val = getattr(cfg, name)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{name} must be a number")
    val = float(val)
    if not math.isfinite(val) or val < 0 or (val == 0 and not allow_zero):
        raise ConfigError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {val!r}")
    object.__setattr__(cfg, name, val)


def _integer(name, val):
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError(f"{name} must be an integer, got {val!r}")
    return int(val)


def _complex(name, val):
    try:
        if isinstance(val, (list, tuple)):
            if len(val) != 2:
                raise ValueError
            z = complex(float(val[0]), float(val[1]))
        elif isinstance(val, str):
            z = complex(val.replace(" ", ""))
        elif isinstance(val, bool):
            raise ValueError
        else:
            z = complex(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be [re, im] or a complex string, got {val!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ConfigError(f"{name} must be finite")
    return z


def _grid(name, val):
    try:
        vals = tuple(float(v) for v in val)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if not vals:
        raise ConfigError(f"{name} must not be empty")
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise ConfigError(f"{name} must be finite and non-negative")
    if any(b <= a for a, b in zip(vals[:-1], vals[1:])):
        raise ConfigError(f"{name} must be strictly increasing")
    return vals


def parse_config(data: dict, command: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    if command is not None:
        if data.setdefault("command", command) != command:
            raise ConfigError(f"config is for {data['command']!r}, not {command!r}")
    if "command" not in data:
        raise ConfigError("config has no command")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**data)


def load_config(path, command: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    return parse_config(data, command)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
