"""Experiment configuration: JSON in, validated dataclass out, stable hash.

Every output artifact embeds the config hash + seed + package version so a
result can always be traced to the exact settings that produced it.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from . import __version__


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


STAGE1_DEFAULTS = {"lr": 5e-5, "epochs": 30, "batch_size": 64,
                   "expert_trajectories": 3000, "critic_samples": 2}
STAGE2_DEFAULTS = {"lr": 5e-6, "eps": 0.2, "gamma": 0.99, "episodes_per_update": 16,
                   "updates": 100, "sigma": 0.1,
                   "tasks": ["SocialNav", "DynPointNav", "DynExploration"],
                   "task_weights": None}

DEFAULTS = {
    "task": "PointNav",
    "head": "rf",
    "M": 16,
    "K": 6,
    "seed": 0,
    "episodes": 100,
    "scenes": None,
    "eval_scenes": None,
    "workers": 1,
    "out": "runs/out",
    "assert_thresholds": {},
    "stage1": STAGE1_DEFAULTS,
    "stage2": STAGE2_DEFAULTS,
}

_PATH_FIELDS = ("scenes", "eval_scenes")
_VALID_HEADS = ("regression", "ddpm", "cfm", "rf")
_VALID_TASKS = ("PointNav", "Exploration", "DynPointNav", "SocialNav", "DynExploration")


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def to_dict(self):
        return dict(self.raw)


def _merged(base, override):
    out = dict(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merged(out[k], v)
        else:
            out[k] = v
    return out


_VOLATILE_KEYS = ("out", "workers")  # do not affect results; kept out of the hash


def config_hash(d) -> str:
    semantic = {k: v for k, v in d.items() if k not in _VOLATILE_KEYS}
    blob = json.dumps(semantic, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path=None, overrides=None, base_dir=None) -> ExperimentConfig:
    """Merge defaults <- file <- CLI overrides, then validate."""
    data = {}
    if path is not None:
        try:
            with open(path) as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {path}: {e}") from e
        if base_dir is None:
            base_dir = os.path.dirname(os.path.abspath(path))
    merged = _merged(DEFAULTS, data)
    merged = _merged(merged, overrides or {})
    if base_dir:
        for key in _PATH_FIELDS:
            p = merged.get(key)
            if p and not os.path.isabs(p):
                merged[key] = os.path.join(base_dir, p)
    validate(merged)
    return ExperimentConfig(raw=merged)


def validate(cfg: dict):
    if cfg["head"] not in _VALID_HEADS:
        raise ConfigError(f"head must be one of {_VALID_HEADS}, got {cfg['head']!r}")
    if cfg["task"] not in _VALID_TASKS:
        raise ConfigError(f"task must be one of {_VALID_TASKS}, got {cfg['task']!r}")
    if not (isinstance(cfg["M"], int) and cfg["M"] >= 1):
        raise ConfigError(f"M must be a positive integer, got {cfg['M']!r}")
    if not (isinstance(cfg["K"], int) and cfg["K"] >= 1):
        raise ConfigError(f"K must be a positive integer, got {cfg['K']!r}")
    if cfg["episodes"] < 1:
        raise ConfigError("episodes must be >= 1")
    for stage, keys in (("stage1", ("lr", "epochs", "batch_size", "expert_trajectories")),
                        ("stage2", ("lr", "eps", "gamma", "episodes_per_update", "updates"))):
        for k in keys:
            v = cfg[stage][k]
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{stage}.{k} must be positive, got {v!r}")
    for t in cfg["stage2"]["tasks"]:
        if t not in _VALID_TASKS:
            raise ConfigError(f"stage2 task {t!r} unknown")
    for key in _PATH_FIELDS:
        p = cfg.get(key)
        if p is not None and not os.path.exists(p):
            raise ConfigError(f"{key} file does not exist: {p}")


def artifact_meta(cfg: ExperimentConfig, seed=None):
    return {"version": __version__, "config_hash": cfg.hash,
            "seed": cfg["seed"] if seed is None else seed}
