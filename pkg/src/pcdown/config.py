"""Run configuration: one flat dataclass, per-task presets, and a lossless
key=value text form used inside reports and checkpoints."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ConfigurationError

__all__ = ["RunConfig", "preset", "config_to_text", "config_from_text"]


@dataclass
class RunConfig:
    # task / data
    task: str = "classification"
    dataset: str = "synthetic"
    data_root: str = ""
    n: int = 256
    m: int = 16
    num_classes: int = 4
    train_per_class: int = 16
    test_per_class: int = 8
    # flexible-size training
    flexible: bool = False
    m_choices: tuple[int, ...] = (8, 16, 32, 64)
    # optimization
    epochs: int = 60
    batch_size: int = 8
    lr_start: float = 5e-4
    lr_end: float = 1e-5
    seed: int = 0
    joint: bool = False
    # relaxation / sparsification
    tau_start: float = 1.0
    tau_min: float = 0.1
    anneal_fraction: float = 0.8
    sparsify_threshold: float = 0.01
    # loss mixing
    alpha: float = 30.0
    lambda_emd: float = 0.1
    translation_weight: float = 1.0
    # robustness eval
    noise_level: float = 0.0
    # architecture
    encoder_widths: tuple[int, ...] = (64, 64, 64, 128, 128)
    score_widths: tuple[int, ...] = (512, 256, 128)
    head_point_widths: tuple[int, ...] = (64, 64, 64, 128, 1024)
    head_fc_widths: tuple[int, ...] = (512, 256)
    code_dim: int = 128
    fold_patches: int = 4
    fold_grid: tuple[int, int] = (16, 16)
    head_epochs: int = 60
    head_lr: float = 1e-3

    def validate(self) -> "RunConfig":
        from .tasks import TASK_KINDS

        if self.task not in TASK_KINDS:
            raise ConfigurationError(f"task must be one of {TASK_KINDS}, got {self.task!r}")
        if self.dataset not in ("synthetic", "dir"):
            raise ConfigurationError(f"dataset must be 'synthetic' or 'dir', got {self.dataset!r}")
        if self.dataset == "dir" and not self.data_root:
            raise ConfigurationError("dataset 'dir' needs data_root")
        if not 1 <= self.m <= self.n:
            raise ConfigurationError(f"need 1 <= m <= n, got m={self.m} n={self.n}")
        if self.flexible and (not self.m_choices or max(self.m_choices) > self.n):
            raise ConfigurationError("m_choices must be non-empty and <= n")
        for name in ("epochs", "batch_size", "num_classes", "head_epochs"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for name in ("lr_start", "lr_end", "tau_start", "tau_min", "head_lr"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be positive and finite, got {v}")
        if self.tau_min > self.tau_start:
            raise ConfigurationError("tau_min must not exceed tau_start")
        if not 0.0 < self.anneal_fraction <= 1.0:
            raise ConfigurationError("anneal_fraction must be in (0, 1]")
        if not 0.0 <= self.sparsify_threshold < 1.0:
            raise ConfigurationError("sparsify_threshold must be in [0, 1)")
        for name in ("alpha", "lambda_emd", "translation_weight", "noise_level"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be >= 0 and finite, got {v}")
        return self

    @property
    def m_max(self) -> int:
        return max(self.m_choices) if self.flexible else self.m


# per-task defaults: (tau_min, alpha, lr_start)
_TASK_SETTINGS = {
    "classification": dict(tau_min=0.1, alpha=30.0, lr_start=5e-4),
    "reconstruction": dict(tau_min=0.5, alpha=0.2, lr_start=5e-4),
    "reconstruction_fold": dict(tau_min=0.5, alpha=0.2, lr_start=5e-4),
    "registration": dict(tau_min=0.1, alpha=1.0, lr_start=1e-4),
}

# compact widths so the toy synthetic runs finish quickly on one CPU core;
# paper-scale widths stay the dataclass defaults
_TOY_SETTINGS = dict(
    encoder_widths=(32, 64, 64),
    score_widths=(128, 64),
    head_point_widths=(32, 64, 128),
    head_fc_widths=(64,),
    code_dim=64,
)


def preset(task: str, toy: bool = True, **overrides) -> RunConfig:
    """Task-specific config with sensible defaults applied in order:
    task settings, toy shrinkage, then caller overrides."""
    if task not in _TASK_SETTINGS:
        raise ConfigurationError(f"no preset for task {task!r}")
    kwargs: dict = dict(task=task, **_TASK_SETTINGS[task])
    if toy:
        kwargs.update(_TOY_SETTINGS)
    kwargs.update(overrides)
    return replace(RunConfig(), **kwargs).validate()


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(float(value))  # plain float even if handed a numpy scalar
    return str(value)


def _parse_value(text: str, target_type, example):
    if target_type is bool:
        return text == "True"
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    if target_type is str:
        return text
    if isinstance(example, tuple):
        if not text:
            return ()
        return tuple(int(v) for v in text.split(","))
    raise ConfigurationError(f"cannot parse config value type {target_type}")


def config_to_text(config: RunConfig) -> str:
    lines = []
    for f in fields(config):
        lines.append(f"{f.name}={_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> RunConfig:
    known = {f.name: f for f in fields(RunConfig)}
    defaults = RunConfig()
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        example = getattr(defaults, key)
        values[key] = _parse_value(raw.strip(), type(example), example)
    return replace(defaults, **values)
