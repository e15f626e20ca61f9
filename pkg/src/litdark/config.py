"""Run configuration: presets plus a flat TOML file with dotted section keys.

Example::

    market.sigma = 0.2
    exchange.eta = 0.05
    solver.T = 1.0
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .hamiltonians import AgentParams, ExchangeParams
from .market import MarketParams
from .neural import TrainConfig
from .simulator import SimConfig


@dataclass(frozen=True)
class SolverConfig:
    T: float = 1.0
    dt: float = 1.0
    volume_step: float = 1.0
    z_step: float = 0.05

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0 and self.volume_step > 0 and self.z_step > 0):
            raise ValueError("solver T, dt, volume_step and z_step must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError("dt must divide T")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


PRESETS = {
    "reference": {},
    "high-vol": {"market": {"sigma": 0.4}},
    "equal-pools": {
        "market": {"gamma_lit": 1e-4, "gamma_dark": 1e-4, "theta_lit": 0.2, "theta_dark": 0.2,
                   "sigma": 0.2, "a_lit": 5000.0, "a_dark": 5000.0},
        "exchange": {"c_lit": 0.05, "c_dark": 0.05},
    },
    "lit-impact": {"market": {"gamma_lit": 1e-4, "gamma_dark": 2e-5}},
    "high-impact": {"market": {"gamma_lit": 2.5e-4, "gamma_dark": 2.5e-4}},
}

SECTIONS = {"market": MarketParams, "agent": AgentParams, "exchange": ExchangeParams,
            "train": TrainConfig, "sim": SimConfig, "solver": SolverConfig}


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams = field(default_factory=MarketParams)
    agent: AgentParams = field(default_factory=AgentParams)
    exchange: ExchangeParams = field(default_factory=ExchangeParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    preset: str = "reference"

    def to_dict(self) -> dict:
        out = {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}
        out["preset"] = self.preset
        return out


def _merge(base: dict, extra: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for section, values in extra.items():
        out.setdefault(section, {}).update(values)
    return out


def build(overrides: dict | None = None, preset: str = "reference", seed: int | None = None) -> RunConfig:
    """Resolve preset, then file/dict overrides, then the seed into a RunConfig."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    data = _merge({}, PRESETS[preset])
    overrides = dict(overrides or {})
    if "preset" in overrides:
        raise ConfigError("select the preset with --preset, not inside the config file")
    for section, values in overrides.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"{section} must hold dotted keys such as {section}.name = value")
    data = _merge(data, overrides)
    if seed is not None:
        data.setdefault("train", {})["seed"] = int(seed)
        data.setdefault("sim", {})["seed"] = int(seed)
    try:
        parts = {name: cls.from_mapping(data.get(name, {})) if hasattr(cls, "from_mapping")
                 else cls(**data.get(name, {})) for name, cls in SECTIONS.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(preset=preset, **parts)
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: RunConfig):
    mp, ep, so = cfg.market, cfg.exchange, cfg.solver
    n = mp.q_bar / so.volume_step
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("solver.volume_step must divide market.q_bar")
    m = ep.z_bar / so.z_step
    if abs(m - round(m)) > 1e-9:
        raise ConfigError("solver.z_step must divide exchange.z_bar")
    if abs(cfg.sim.q0) > mp.q_bar:
        raise ConfigError("sim.q0 must lie within the risk limit")


def load_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def load(path=None, preset: str = "reference", seed: int | None = None) -> RunConfig:
    return build(load_file(path) if path else {}, preset, seed)
