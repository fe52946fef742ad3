"""
Typed access to the shipped defaults in ``config/defaults.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

DEFAULT_SETTINGS_PATH = Path(__file__).resolve().parent / "config" / "defaults.json"


@dataclass(frozen=True)
class GdSettings:
    """Knobs for classical gradient-descent autofocus."""

    iterations: int = 10
    learning_rate_grid: tuple[float, ...] = tuple(10.0**k for k in range(-6, 4))
    learning_rates: dict[str, float] = field(default_factory=dict)
    osf_b: float = 1e-6
    weight: str = "identity"
    lowcontrast_window: int = 5
    lowcontrast_quantile: float = 0.25


@dataclass(frozen=True)
class TrainingSettings:
    batch_size: int = 32
    learning_rate: float = 1e-2
    epochs: int = 200
    fresh_corruption_per_epoch: bool = True
    loss_mode: str = "relative"
    zero_phase_input: bool = False


@dataclass(frozen=True)
class DespeckleSettings:
    weight: float = 1.0
    iterations: int = 50
    log_domain: bool = True
    epsilon: float = 1e-3
    preserve_mean: bool = True


@dataclass(frozen=True)
class DatasetSettings:
    train: int = 120
    val: int = 120
    test: int = 264


@dataclass(frozen=True)
class SceneSettings:
    """Ranges the dataset builder draws per-image scene parameters from."""

    max_scatterers: int = 8
    scatterer_snr_db: tuple[float, float] = (15.0, 35.0)
    ripple_wavelength_px: tuple[float, float] = (6.0, 32.0)
    ripple_depth: tuple[float, float] = (0.2, 0.9)
    shadow_fraction: tuple[float, float] = (0.1, 0.5)


@dataclass(frozen=True)
class EvaluationSettings:
    identical_mse: float = 1e-10
    crossval_split: str = "test"


@dataclass(frozen=True)
class LoggingSettings:
    level: str = "INFO"
    json: bool = True


@dataclass(frozen=True)
class Settings:
    image_size: int = 256
    gd: GdSettings = field(default_factory=GdSettings)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    despeckle: DespeckleSettings = field(default_factory=DespeckleSettings)
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    scene: SceneSettings = field(default_factory=SceneSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)


def _tuples(section: dict) -> dict:
    # JSON has no tuples; frozen settings should not hand out mutable lists.
    return {key: tuple(value) if isinstance(value, list) else value for key, value in section.items()}


@lru_cache(maxsize=4)
def load_settings(path: Optional[Path] = None) -> Settings:
    """
    Load settings from JSON configuration.

    Parameters
    ----------
    path:
        Optional custom path; defaults to config/defaults.json alongside this module.
    """
    settings_path = path or DEFAULT_SETTINGS_PATH
    with settings_path.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)

    sections = {
        "gd": GdSettings,
        "training": TrainingSettings,
        "despeckle": DespeckleSettings,
        "dataset": DatasetSettings,
        "scene": SceneSettings,
        "evaluation": EvaluationSettings,
        "logging": LoggingSettings,
    }
    unknown = set(raw) - set(sections) - {"image_size"}
    if unknown:
        raise ValueError(f"Unknown settings sections in {settings_path}: {sorted(unknown)}")

    kwargs: dict[str, object] = {name: cls(**_tuples(raw.get(name, {}))) for name, cls in sections.items()}
    if "image_size" in raw:
        kwargs["image_size"] = int(raw["image_size"])
    return Settings(**kwargs)
