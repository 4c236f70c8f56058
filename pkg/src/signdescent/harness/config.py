"""Experiment configuration and its flat TOML file format.

A config file is a single TOML table of ``key = value`` pairs; every key is
one field of :class:`ExperimentConfig`.  Unknown keys, wrong types and
out-of-range values are :class:`ConfigError`.  Optional fields that are
unset are simply omitted from the file.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from ..core import InvalidInputError

PROBLEMS = ("rosenbrock", "counterexample", "quadratic", "partitioned-quadratic")
OPTIMIZERS = ("signsgd-1", "signsgd-2", "majority-vote", "ssdm", "sgd")
SCHEDULES = ("constant", "inverse-sqrt")
SINGLE_NODE = ("signsgd-1", "signsgd-2", "sgd")


class ConfigError(InvalidInputError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    problem: str
    optimizer: str
    K: int
    gamma: Optional[float] = None
    schedule: str = "constant"
    dim: int = 10
    M: int = 1
    tau: int = 1
    nu: float = 1.0
    noise_sigma: float = 0.0
    eps: float = 0.5
    beta: Optional[float] = None
    repetitions: int = 10
    base_seed: int = 0
    checkpoint_stride: int = 0
    probe_samples: int = 0
    output: str = ""
    x0: list = field(default_factory=list)
    curvature: list = field(default_factory=list)
    node_weights: list = field(default_factory=list)
    problem_seed: int = 0
    description: str = ""

    def __post_init__(self):
        self.validate()

    @property
    def stride(self) -> int:
        """Checkpoint spacing; 0 in the file means ``max(1, K // 100)``."""
        return self.checkpoint_stride or max(1, self.K // 100)

    def validate(self) -> None:
        _check_types(self)
        if not self.experiment:
            raise ConfigError("experiment must be a non-empty id")
        for key, allowed in (("problem", PROBLEMS), ("optimizer", OPTIMIZERS), ("schedule", SCHEDULES)):
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {', '.join(allowed)}; got {getattr(self, key)!r}")
        positive = {"K": self.K, "dim": self.dim, "M": self.M, "tau": self.tau, "repetitions": self.repetitions}
        for key, value in positive.items():
            if value < 1:
                raise ConfigError(f"{key} must be at least 1, got {value}")
        for key in ("checkpoint_stride", "probe_samples", "base_seed", "problem_seed"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be nonnegative")
        if self.gamma is None and self.optimizer != "ssdm":
            raise ConfigError(f"optimizer {self.optimizer} needs gamma")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.beta is not None and not 0.0 <= self.beta < 1.0:
            raise ConfigError("beta must lie in [0, 1)")
        if self.beta is not None and self.optimizer != "ssdm":
            raise ConfigError("beta only applies to ssdm")
        if self.nu < 0 or self.noise_sigma < 0:
            raise ConfigError("noise parameters must be nonnegative")
        if self.problem == "counterexample" and self.dim != 2:
            raise ConfigError("the counterexample problem is 2-dimensional (set dim = 2)")
        if self.optimizer in SINGLE_NODE and self.M != 1:
            raise ConfigError(f"{self.optimizer} is a single-node method; M must be 1")
        if self.x0 and len(self.x0) != self.dim:
            raise ConfigError(f"x0 has {len(self.x0)} entries, expected dim = {self.dim}")
        if self.curvature and len(self.curvature) != self.dim:
            raise ConfigError(f"curvature has {len(self.curvature)} entries, expected dim = {self.dim}")
        if self.node_weights:
            if self.problem != "partitioned-quadratic":
                raise ConfigError("node_weights only apply to partitioned-quadratic")
            if len(self.node_weights) != self.M:
                raise ConfigError(f"node_weights needs M = {self.M} entries")
            if any(not w > 0 for w in self.node_weights):
                raise ConfigError("node_weights must be positive")

    def to_dict(self) -> dict:
        """Plain dict with unset optional fields dropped (TOML has no null)."""
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = [f.name for f in dataclasses.fields(cls)
                   if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
                   and f.name not in data]
        if missing:
            raise ConfigError(f"missing required config keys: {', '.join(missing)}")
        data = dict(data)
        for key in _FLOAT_FIELDS | _OPTIONAL_FLOAT_FIELDS:
            if isinstance(data.get(key), int) and not isinstance(data.get(key), bool):
                data[key] = float(data[key])
        for key in _LIST_FIELDS:
            if isinstance(data.get(key), list):
                data[key] = [float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                             for v in data[key]]
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc
        nested = [k for k, v in data.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"config must be flat; found tables {', '.join(nested)}")
        return cls.from_dict(data)


_INT_FIELDS = {"K", "dim", "M", "tau", "repetitions", "base_seed", "checkpoint_stride",
               "probe_samples", "problem_seed"}
_FLOAT_FIELDS = {"nu", "noise_sigma", "eps"}
_OPTIONAL_FLOAT_FIELDS = {"gamma", "beta"}
_STR_FIELDS = {"experiment", "problem", "optimizer", "schedule", "output", "description"}
_LIST_FIELDS = {"x0", "curvature", "node_weights"}


def _check_types(cfg: ExperimentConfig) -> None:
    for key in _INT_FIELDS:
        v = getattr(cfg, key)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key} must be an integer, got {v!r}")
    for key in _FLOAT_FIELDS | _OPTIONAL_FLOAT_FIELDS:
        v = getattr(cfg, key)
        if v is None and key in _OPTIONAL_FLOAT_FIELDS:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{key} must be a finite number, got {v!r}")
    for key in _STR_FIELDS:
        if not isinstance(getattr(cfg, key), str):
            raise ConfigError(f"{key} must be a string")
    for key in _LIST_FIELDS:
        v = getattr(cfg, key)
        if not isinstance(v, list) or any(isinstance(e, bool) or not isinstance(e, (int, float))
                                          or not math.isfinite(e) for e in v):
            raise ConfigError(f"{key} must be a list of finite numbers")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.loads(text)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(config.dumps())
