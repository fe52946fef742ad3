"""
Weighting functions applied inside the sharpness objective.

A weight map suppresses regions of the defocused image that mislead the
optimizer; it is computed once from |g_e| and held fixed while iterating.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

WEIGHT_NAMES = ("identity", "lowcontrast")


@dataclass(frozen=True)
class WeightFn:
    """Named, parameterized map from |g_e| to a non-negative weight image."""

    name: str = "identity"
    window: Optional[int] = None
    threshold_quantile: Optional[float] = None

    def __post_init__(self) -> None:
        if self.name not in WEIGHT_NAMES:
            raise ValueError(f"Unknown weight function {self.name!r}; expected one of {WEIGHT_NAMES}")
        if self.name == "lowcontrast":
            if self.window is None or self.window < 3 or self.window % 2 == 0:
                raise ValueError(f"lowcontrast window must be odd and >= 3, got {self.window}")
            if self.threshold_quantile is None or not 0.0 < self.threshold_quantile < 1.0:
                raise ValueError(f"lowcontrast quantile must lie in (0, 1), got {self.threshold_quantile}")

    def __call__(self, magnitude: np.ndarray) -> np.ndarray:
        magnitude = np.asarray(magnitude, dtype=np.float64)
        if self.name == "identity":
            return np.ones_like(magnitude)
        std = local_std(magnitude, self.window)
        threshold = np.quantile(std, self.threshold_quantile)
        return np.where(std < threshold, 0.0, 1.0)


def weight_identity() -> WeightFn:
    return WeightFn("identity")


def weight_lowcontrast(window: int, threshold_quantile: float) -> WeightFn:
    """Zero out pixels whose windowed stddev of |g_e| falls below the given quantile."""
    return WeightFn("lowcontrast", window=window, threshold_quantile=threshold_quantile)


def local_std(magnitude: np.ndarray, window: int) -> np.ndarray:
    """Windowed population standard deviation with reflected borders."""
    # Centering on the median keeps flat regions at exactly zero variance.
    centered = magnitude - np.median(magnitude)
    mean = ndimage.uniform_filter(centered, size=window, mode="reflect")
    mean_sq = ndimage.uniform_filter(centered * centered, size=window, mode="reflect")
    return np.sqrt(np.clip(mean_sq - mean * mean, 0.0, None))
