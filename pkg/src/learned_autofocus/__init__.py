"""
Learned single-pass autofocus: a compact CNN regresses phase-polynomial
coefficients and is trained self-supervised on relative sharpness gain.
"""

from .pipeline import PipelineOutput, infer, pipeline_backward, pipeline_forward
from .regressor import RegressorParams, regressor_forward
from .training import TrainConfig, TrainHistory, train

__all__ = [
    "PipelineOutput",
    "RegressorParams",
    "TrainConfig",
    "TrainHistory",
    "infer",
    "pipeline_backward",
    "pipeline_forward",
    "regressor_forward",
    "train",
]
