"""Experiment configuration: strict, versioned, validated before any work.

Config files are YAML with a fixed nesting. Unknown keys anywhere are errors,
as are type and range violations; preflight collects every problem instead of
stopping at the first. All sections except ``schema_version`` are optional and
fall back to defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import yaml

from .losses import LossWeights
from .metrics import LD_MODES
from .nets import ModelConfig
from .training import TrainConfig
from .workflow import BUILTIN_GRAPHS

__all__ = ["ConfigError", "DataSpec", "MetricOptions", "ExperimentConfig",
           "load_config", "CONFIG_SCHEMA_VERSION"]

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Carries every preflight violation found in a config."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" +
                         "\n".join(f"  - {v}" for v in self.violations))


@dataclass(frozen=True)
class DataSpec:
    """Where evaluation data comes from: a synthetic benchmark or CSV files."""

    kind: str = "synthetic"
    graph: str = "seven_phase"
    n_videos: int = 60
    train_fraction: float = 0.8
    noise_sigma: float = 0.3
    annotations: str | None = None
    features: str | None = None


@dataclass(frozen=True)
class MetricOptions:
    delta: int = 15
    ld_mode: str = "all-samples-mean"
    eval_stride: int = 5
    bw_iters: int = 30
    timeline_count: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: str | None = None
    data: DataSpec = field(default_factory=DataSpec)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(n_phases=7, feature_dim=16))
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    metrics: MetricOptions = field(default_factory=MetricOptions)
    horizons: tuple = ((15, 10), (15, 15), (15, 45), (5, 15))


def _check_keys(section: dict, allowed, where: str, problems: list) -> dict:
    unknown = sorted(set(section) - set(allowed))
    for key in unknown:
        problems.append(f"{where}: unknown key {key!r}")
    return {k: v for k, v in section.items() if k in allowed}


def _build_section(cls, section: dict, where: str, problems: list,
                   defaults: dict | None = None, fallback=None):
    """Instantiate a dataclass from a config section, collecting errors."""
    names = [f.name for f in fields(cls)]
    clean = _check_keys(section, names, where, problems)
    if defaults:
        clean = {**defaults, **clean}
    try:
        return cls(**clean)
    except (TypeError, ValueError) as err:
        problems.append(f"{where}: {err}")
        return fallback() if fallback else cls()


def _preflight(cfg: ExperimentConfig, base_dir: str, problems: list) -> None:
    data = cfg.data
    if data.kind not in ("synthetic", "csv"):
        problems.append(f"data.kind: must be 'synthetic' or 'csv', got {data.kind!r}")
    elif data.kind == "synthetic":
        if data.graph not in BUILTIN_GRAPHS:
            path = os.path.join(base_dir, data.graph)
            if not os.path.isfile(path):
                problems.append(
                    f"data.graph: {data.graph!r} is neither a builtin graph "
                    f"({', '.join(sorted(BUILTIN_GRAPHS))}) nor an existing file")
        if data.n_videos < 2:
            problems.append(f"data.n_videos: need at least 2, got {data.n_videos}")
        if not 0.0 < data.train_fraction < 1.0:
            problems.append(
                f"data.train_fraction: must be in (0, 1), got {data.train_fraction}")
        if data.noise_sigma < 0:
            problems.append(f"data.noise_sigma: must be >= 0, got {data.noise_sigma}")
    else:
        for name in ("annotations", "features"):
            value = getattr(data, name)
            if value is None:
                problems.append(f"data.{name}: required when data.kind is 'csv'")
            elif not os.path.isfile(os.path.join(base_dir, value)):
                problems.append(f"data.{name}: file not found: {value}")
    if cfg.metrics.delta <= 0:
        problems.append(f"metrics.delta: must be positive, got {cfg.metrics.delta}")
    if cfg.metrics.ld_mode not in LD_MODES:
        problems.append(
            f"metrics.ld_mode: must be one of {LD_MODES}, got {cfg.metrics.ld_mode!r}")
    if cfg.metrics.eval_stride < 1:
        problems.append(f"metrics.eval_stride: must be >= 1, got {cfg.metrics.eval_stride}")
    if cfg.metrics.bw_iters < 1:
        problems.append(f"metrics.bw_iters: must be >= 1, got {cfg.metrics.bw_iters}")
    if cfg.metrics.timeline_count < 0:
        problems.append(
            f"metrics.timeline_count: must be >= 0, got {cfg.metrics.timeline_count}")
    for i, pair in enumerate(cfg.horizons):
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or not all(isinstance(v, int) and v > 0 for v in pair)):
            problems.append(
                f"horizons[{i}]: expected a [t_past, t_future] pair of positive "
                f"integers, got {pair!r}")
    if cfg.model.feature_dim < cfg.model.n_phases:
        problems.append(
            f"model.feature_dim ({cfg.model.feature_dim}) must be >= "
            f"model.n_phases ({cfg.model.n_phases}) for prototype features")


def load_config(path, seed: int | None = None,
                output_dir: str | None = None) -> ExperimentConfig:
    """Parse and validate a config file; raises ConfigError listing every
    violation. ``seed`` and ``output_dir`` override the file's values."""
    problems: list[str] = []
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except yaml.YAMLError as err:
        raise ConfigError([f"config is not valid YAML: {err}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError([f"config root must be a mapping, got {type(raw).__name__}"])

    version = raw.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        problems.append(
            f"schema_version: expected {CONFIG_SCHEMA_VERSION}, got {version!r}")

    top = _check_keys(raw, ["schema_version", "seed", "output_dir", "data",
                            "model", "train", "loss", "metrics", "horizons"],
                      "top level", problems)

    model_defaults = {"n_phases": 7, "feature_dim": 16}
    model_fallback = lambda: ModelConfig(**model_defaults)  # noqa: E731

    def section(name, cls, defaults=None, fallback=None):
        value = top.get(name, {})
        if value is None:
            value = {}
        if not isinstance(value, dict):
            problems.append(f"{name}: must be a mapping")
            return fallback() if fallback else cls()
        return _build_section(cls, value, name, problems, defaults, fallback)

    data = section("data", DataSpec)
    model = section("model", ModelConfig, model_defaults, model_fallback)
    train = section("train", TrainConfig)
    loss = section("loss", LossWeights)
    metrics = section("metrics", MetricOptions)

    horizons = top.get("horizons", [[15, 10], [15, 15], [15, 45], [5, 15]])
    if not isinstance(horizons, list):
        problems.append("horizons: must be a list of [t_past, t_future] pairs")
        horizons = []

    file_seed = top.get("seed", 0)
    if not isinstance(file_seed, int):
        problems.append(f"seed: must be an integer, got {file_seed!r}")
        file_seed = 0

    out = top.get("output_dir")
    if out is not None and not isinstance(out, str):
        problems.append(f"output_dir: must be a string, got {out!r}")
        out = None

    cfg = ExperimentConfig(
        seed=seed if seed is not None else file_seed,
        output_dir=output_dir if output_dir is not None else out,
        data=data, model=model, train=train, loss=loss, metrics=metrics,
        horizons=tuple(tuple(p) if isinstance(p, (list, tuple)) else p
                       for p in horizons),
    )
    _preflight(cfg, os.path.dirname(os.path.abspath(path)), problems)
    if problems:
        raise ConfigError(problems)
    return cfg
