"""JSON run configuration: sections ``sim``, ``meals``, ``bnn``, ``mpc``, ``harness``.

Every section mirrors the corresponding component's parameters; unknown
keys anywhere are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError
from .meals import MealGenConfig
from .mpc import MpcConfig
from .patient import DEFAULT_PARAM_RANGES, PARAM_NAMES


@dataclass(frozen=True)
class SimConfig:
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_PARAM_RANGES))
    dt_sub: float = 0.05
    dt_absorb: float = 1.0


@dataclass(frozen=True)
class BnnConfig:
    hidden_size: int = 64
    t_hist: int = 72
    t_fut: int = 72
    dropout: float = 0.1
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 30
    lr_patience: int = 8
    lr_decay: float = 0.5
    grad_clip: float = 5.0
    mc_passes: int = 30
    val_fraction: float = 0.1

    def train_config(self):
        from .forecast.train import TrainConfig
        return TrainConfig(lr=self.lr, momentum=self.momentum,
                           weight_decay=self.weight_decay,
                           batch_size=self.batch_size, max_epochs=self.max_epochs,
                           patience=self.patience, lr_patience=self.lr_patience,
                           lr_decay=self.lr_decay, grad_clip=self.grad_clip)


@dataclass(frozen=True)
class HarnessConfig:
    foundation_patients: int = 10
    foundation_days: int = 60
    test_patients: int = 5
    finetune_days: int = 30
    open_loop_days: int = 60
    closed_loop_days: int = 60
    warmup_days: int = 3
    calibration_warmup_days: int = 5
    initial_dose: float = -1.0   # < 0 means "start at the calibrated fixed dose"
    stride_hours: int = 24
    dose_block_days: tuple[int, int] = (1, 5)
    training_dose_max: float = 0.4  # cap for randomized data-generation doses
    baseline_grid: tuple[float, ...] = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35,
                                        0.4, 0.5, 0.6, 0.7, 0.85, 1.0)
    baseline_target: float = 0.95


@dataclass(frozen=True)
class AppConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    meals: MealGenConfig = field(default_factory=MealGenConfig)
    bnn: BnnConfig = field(default_factory=BnnConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)


# JSON key -> dataclass field name, where they differ (mpc uses the
# symbols from the optimization problem)
_MPC_KEYS = {"theta": "theta", "p": "p", "lambda": "lam", "c": "c",
             "T_days": "t_days", "J": "j_scenarios",
             "actions": "action_factors", "u_min": "u_min", "u_max": "u_max",
             "enumeration_cap": "enumeration_cap", "mc_passes": "mc_passes"}

_TUPLE_FIELDS = {"action_factors", "dose_block_days", "baseline_grid",
                 "amp_breakfast", "amp_lunch", "amp_dinner", "nominal_centers",
                 "spread_range"}


def _build(cls, section: dict, section_name: str, key_map: dict | None = None):
    valid = {f.name for f in fields(cls)}
    key_map = key_map or {name: name for name in valid}
    unknown = set(section) - set(key_map)
    if unknown:
        raise ConfigurationError(
            f"unknown keys in config section '{section_name}': {sorted(unknown)}")
    kwargs = {}
    for key, value in section.items():
        name = key_map[key]
        if name in _TUPLE_FIELDS:
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


def _build_sim(section: dict) -> SimConfig:
    section = dict(section)
    ranges = section.pop("ranges", None)
    cfg = _build(SimConfig, section, "sim",
                 {"dt_sub": "dt_sub", "dt_absorb": "dt_absorb"})
    if ranges is not None:
        unknown = set(ranges) - set(PARAM_NAMES)
        if unknown:
            raise ConfigurationError(
                f"unknown parameter names in sim.ranges: {sorted(unknown)}")
        merged = dict(DEFAULT_PARAM_RANGES)
        merged.update({k: tuple(v) for k, v in ranges.items()})
        cfg = SimConfig(ranges=merged, dt_sub=cfg.dt_sub, dt_absorb=cfg.dt_absorb)
    return cfg


def config_from_dict(data: dict) -> AppConfig:
    known_sections = {"sim", "meals", "bnn", "mpc", "harness"}
    unknown = set(data) - known_sections
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return AppConfig(
        sim=_build_sim(data.get("sim", {})),
        meals=_build(MealGenConfig, data.get("meals", {}), "meals"),
        bnn=_build(BnnConfig, data.get("bnn", {}), "bnn"),
        mpc=_build(MpcConfig, data.get("mpc", {}), "mpc", _MPC_KEYS),
        harness=_build(HarnessConfig, data.get("harness", {}), "harness"),
    )


def load_config(path=None) -> AppConfig:
    if path is None:
        return AppConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"{path}: invalid JSON ({err})") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config root must be a JSON object")
    return config_from_dict(data)
