"""
Exception types raised across the autofocus toolkit.

Most errors are also ValueErrors so callers that only care about "bad input"
can keep catching the builtin.
"""

from __future__ import annotations


class AutofocusError(Exception):
    """Base class for every toolkit-specific failure."""


class SlcSizeError(AutofocusError, ValueError):
    """Image is not square, too small, or not a power of two."""


class SlcFormatError(AutofocusError, ValueError):
    """SLC1 file has a bad magic or an inconsistent header."""


class SlcTruncatedError(SlcFormatError):
    """SLC1 payload is shorter than its header promises."""


class NonFiniteError(AutofocusError, ValueError):
    """NaN or Inf encountered where finite values are required."""


class ShapeMismatchError(AutofocusError, ValueError):
    """Two arrays that must agree in shape do not."""


class DegenerateStatisticsError(AutofocusError, ValueError):
    """Image statistics make an operator undefined (e.g. zero median)."""


class UndefinedMetricError(AutofocusError, ValueError):
    """Sharpness metric is undefined for the given image."""


class CheckpointFormatError(AutofocusError, ValueError):
    """DAF1 checkpoint cannot be parsed or does not match the architecture."""


class DivergenceError(AutofocusError, RuntimeError):
    """Optimization produced a non-finite objective or gradient."""

    def __init__(self, message: str, *, iteration: int | None = None, epoch: int | None = None) -> None:
        super().__init__(message)
        self.iteration = iteration
        self.epoch = epoch
