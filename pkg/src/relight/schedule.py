"""Learning-rate schedule: linear warmup, flat hold, cosine decay."""

import math
from dataclasses import dataclass

from .exceptions import ConfigurationError


@dataclass
class ScheduleConfig:
    lr_min: float = 1e-8
    lr_max: float = 2e-5
    warmup_epochs: int = 75
    hold_until: int = 600
    total_epochs: int = 750

    def __post_init__(self):
        # Equality is tolerated so heavily shortened runs (e.g. a 2-epoch
        # smoke run) can degenerate to warmup-only; the cosine leg simply
        # vanishes when hold_until == total_epochs.
        if not (0 < self.warmup_epochs <= self.hold_until <= self.total_epochs):
            raise ConfigurationError(
                f"need 0 < warmup_epochs <= hold_until <= total_epochs, got "
                f"{self.warmup_epochs} / {self.hold_until} / {self.total_epochs}")
        if not self.lr_min < self.lr_max:
            raise ConfigurationError(
                f"lr_min ({self.lr_min}) must be below lr_max ({self.lr_max})")


def lr_at(epoch: int, cfg: ScheduleConfig) -> float:
    """Learning rate for a given epoch index.

    Linear lr_min -> lr_max over the warmup, constant lr_max through
    hold_until, then a half-cosine back down to lr_min at total_epochs.
    """
    if epoch < 0 or epoch > cfg.total_epochs:
        raise ConfigurationError(
            f"epoch {epoch} outside [0, {cfg.total_epochs}]")
    if epoch <= cfg.warmup_epochs:
        frac = epoch / cfg.warmup_epochs
        return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * frac
    if epoch <= cfg.hold_until:
        return cfg.lr_max
    phase = math.pi * (epoch - cfg.hold_until) / (cfg.total_epochs - cfg.hold_until)
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * (1.0 + math.cos(phase)) / 2.0
