"""Experiment configuration: JSON in, validated dataclasses out, and back."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import ContractError
from .envs.hypergrid import TEST_FUNCTIONS
from .envs.ngrams import TASKS
from .mobo import ALConfig
from .scalarize import Kind

TASK_METHODS = {
    "hypergrid": ("mogfn_pc", "moreinforce"),
    "ngrams": ("mogfn_pc", "moreinforce"),
    "al": ("mogfn_al", "random"),
}

# per-task defaults layered under the user's config
TASK_DEFAULTS = {
    "hypergrid": {"env": {}, "train": {}},
    "ngrams": {
        "env": {"max_len": 24},
        "train": {"beta": 48.0, "delta": 0.0, "n_steps": 1500, "batch_size": 64, "lr": 2e-3, "lr_logz": 0.2,
                  "alpha": 1.0, "thermometer_bins": 50},
    },
    "al": {"env": {"max_len": 24}, "train": {}},
}


class ConfigError(ContractError):
    """A configuration field is missing, unknown or invalid."""


@dataclass
class EnvConfig:
    side: int = 8
    objectives: tuple = ("branin", "currin")
    patterns: tuple = TASKS["3-bigrams"]
    max_len: int = 36

    def validate(self, task: str):
        if task == "hypergrid":
            if self.side < 2:
                raise ConfigError("env.side must be at least 2")
            unknown = set(self.objectives) - set(TEST_FUNCTIONS)
            if unknown or len(self.objectives) < 2:
                raise ConfigError(f"env.objectives must name at least two of {sorted(TEST_FUNCTIONS)}")
        else:
            if not self.patterns:
                raise ConfigError("env.patterns must be non-empty")
            if any(len(p) > self.max_len for p in self.patterns):
                raise ConfigError("env.patterns must be no longer than env.max_len")
            if self.max_len < 1:
                raise ConfigError("env.max_len must be positive")


@dataclass
class TrainConfig:
    beta: float = 1.0
    delta: float = 0.05
    n_steps: int = 2000
    batch_size: int = 128
    lr: float = 0.01
    lr_logz: float = 0.01
    alpha: float = 1.5
    scalarization: str = "ws"
    thermometer_bins: int = 0
    hidden: tuple = (64, 64)
    entropy_weight: float = 0.0
    baseline_decay: float = 0.99

    def validate(self):
        if not self.beta > 0:
            raise ConfigError("train.beta must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("train.delta must lie in [0, 1)")
        if self.n_steps < 1:
            raise ConfigError("train.n_steps must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be at least 1")
        if not self.alpha > 0:
            raise ConfigError("train.alpha must be positive")
        if self.scalarization not in {k.value for k in Kind}:
            raise ConfigError(f"train.scalarization must be one of {[k.value for k in Kind]}")
        if self.thermometer_bins < 0:
            raise ConfigError("train.thermometer_bins must be non-negative")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ConfigError("train.baseline_decay must lie in [0, 1)")
        if self.lr < 0 or self.lr_logz < 0:
            raise ConfigError("learning rates must be non-negative")


@dataclass
class EvalConfig:
    n_preferences: int = 16
    n_samples: int = 128
    k: int = 10
    interval: int = 0
    preference_seed: int = 0

    def validate(self):
        if self.n_preferences < 1 or self.n_samples < 1:
            raise ConfigError("eval.n_preferences and eval.n_samples must be positive")
        if not 2 <= self.k <= self.n_samples:
            raise ConfigError("eval.k must lie in [2, eval.n_samples]")
        if self.interval < 0:
            raise ConfigError("eval.interval must be non-negative")


@dataclass
class ExperimentConfig:
    task: str
    method: str
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    al: ALConfig = field(default_factory=ALConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs/default"
    seed: int = 0

    def validate(self):
        if self.task not in TASK_METHODS:
            raise ConfigError(f"task must be one of {sorted(TASK_METHODS)}")
        if self.method not in TASK_METHODS[self.task]:
            raise ConfigError(f"method for task {self.task!r} must be one of {TASK_METHODS[self.task]}")
        self.env.validate(self.task)
        self.train.validate()
        self.eval.validate()
        return self

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(value, default, name: str):
    """Convert a JSON value to the type of the field default, or fail naming the field."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list")
        return tuple(value)
    return value


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix} must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in {prefix}: {', '.join(unknown)}")
    defaults = cls()
    kwargs = {k: _coerce(v, getattr(defaults, k), f"{prefix}.{k}") for k, v in data.items()}
    return cls(**kwargs)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in config: {', '.join(unknown)}")
    for key in ("task", "method"):
        if key not in data:
            raise ConfigError(f"missing required field {key!r}")
    task = data["task"]
    if task not in TASK_METHODS:
        raise ConfigError(f"task must be one of {sorted(TASK_METHODS)}")
    data = _merge(TASK_DEFAULTS[task], data)
    seed = _coerce(data.get("seed", 0), 0, "seed")
    al_data = dict(data.get("al", {}))
    try:
        al = _build(ALConfig, al_data, "al")
    except ConfigError:
        raise
    except (TypeError, ContractError) as exc:
        raise ConfigError(f"al: {exc}") from None
    cfg = ExperimentConfig(
        task=task,
        method=_coerce(data["method"], "", "method"),
        env=_build(EnvConfig, data.get("env", {}), "env"),
        train=_build(TrainConfig, data.get("train", {}), "train"),
        al=al,
        eval=_build(EvalConfig, data.get("eval", {}), "eval"),
        output_dir=_coerce(data.get("output_dir", "runs/default"), "", "output_dir"),
        seed=seed,
    )
    if task == "al":
        cfg.al.seed = seed
        cfg.al.seq_len = cfg.env.max_len
    return cfg.validate()


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return config_from_dict(data)
