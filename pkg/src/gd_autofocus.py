"""
Classical metric-based autofocus: fixed-step gradient descent on phase-polynomial
coefficients, plus learning-rate selection by cross-validation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from src.errors import DivergenceError
from src.sharpness import MetricKind, phase_gradient, sharpness
from src.slc import PhasePolynomial, correct, fft_along_track, phase_basis, validate_slc
from src.weighting import WeightFn, weight_identity

logger = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 10
DEFAULT_LR_GRID: tuple[float, ...] = tuple(10.0**k for k in range(-6, 4))


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent knobs for one autofocus run."""

    metric: MetricKind
    learning_rate: float
    iterations: int = DEFAULT_ITERATIONS
    weight: WeightFn = field(default_factory=weight_identity)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate < 0 or not np.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be a finite non-negative number, got {self.learning_rate}")


@dataclass(frozen=True, eq=False)
class FocusResult:
    """
    Output of any autofocus method.

    ``trace`` holds one objective value per iteration (GD) or the single
    pipeline loss (learned inference).
    """

    g_hat: np.ndarray
    phi_hat: PhasePolynomial
    trace: tuple[float, ...]


def focus_gd(g_e: np.ndarray, cfg: GdConfig) -> FocusResult:
    """
    Estimate and remove the phase error of ``g_e`` by gradient descent.

    Coefficients start at zero. Each iteration evaluates the weighted objective
    -M(w * |g_hat|) and its gradient at the current coefficients, records the
    objective, and takes one step ``c <- c - lr * grad``.
    """
    g_e = validate_slc(g_e)
    size = g_e.shape[0]
    spectrum = fft_along_track(g_e)
    basis = phase_basis(size)
    weight_map = cfg.weight(np.abs(g_e))

    coeffs = np.zeros(basis.shape[1])
    trace: list[float] = []
    for iteration in range(cfg.iterations):
        objective, d_phi, _ = phase_gradient(cfg.metric, spectrum, basis @ coeffs, weight_map)
        grad = basis.T @ d_phi
        if not np.isfinite(objective) or not np.all(np.isfinite(grad)):
            raise DivergenceError(
                f"{cfg.metric.name} gradient descent diverged at iteration {iteration}",
                iteration=iteration,
            )
        trace.append(objective)
        coeffs = coeffs - cfg.learning_rate * grad

    if not np.all(np.isfinite(coeffs)):
        raise DivergenceError(
            f"{cfg.metric.name} gradient descent produced non-finite coefficients",
            iteration=cfg.iterations - 1,
        )
    phi_hat = PhasePolynomial(coeffs)
    return FocusResult(g_hat=correct(g_e, phi_hat), phi_hat=phi_hat, trace=tuple(trace))


def final_sharpness(g_e: np.ndarray, cfg: GdConfig) -> float:
    """Weighted sharpness of the GD result (the quantity cross-validation ranks)."""
    result = focus_gd(g_e, cfg)
    weight_map = cfg.weight(np.abs(g_e))
    return sharpness(cfg.metric, weight_map * np.abs(result.g_hat))


def _score_learning_rate(
    images: Sequence[np.ndarray],
    metric: MetricKind,
    learning_rate: float,
    iterations: int,
    weight: WeightFn,
) -> float:
    cfg = GdConfig(metric=metric, learning_rate=learning_rate, iterations=iterations, weight=weight)
    scores = []
    for g_e in images:
        try:
            scores.append(final_sharpness(g_e, cfg))
        except (DivergenceError, FloatingPointError):
            return -np.inf
    score = float(np.mean(scores))
    return score if np.isfinite(score) else -np.inf


def crossval_lr(
    images: Iterable[np.ndarray],
    metric: MetricKind,
    grid: Optional[Sequence[float]] = None,
    *,
    iterations: int = DEFAULT_ITERATIONS,
    weight: Optional[WeightFn] = None,
    n_jobs: int = 1,
) -> float:
    """
    Pick the learning rate maximizing mean final sharpness over ``images``.

    Diverging learning rates score -inf. Ties go to the smaller learning rate.
    """
    images = list(images)
    grid = list(DEFAULT_LR_GRID if grid is None else grid)
    if not images:
        raise ValueError("crossval_lr needs at least one image")
    if not grid:
        raise ValueError("crossval_lr needs at least one learning rate")
    if any(lr <= 0 for lr in grid):
        raise ValueError(f"Learning rates must be positive, got {grid}")
    weight = weight or weight_identity()

    ordered = sorted(grid)
    scores = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_score_learning_rate)(images, metric, lr, iterations, weight) for lr in ordered
    )

    best_lr, best_score = ordered[0], -np.inf
    for lr, score in zip(ordered, scores):
        logger.info(
            "crossval score",
            extra={"metric": metric.name, "learning_rate": lr, "mean_sharpness": score},
        )
        if score > best_score:
            best_lr, best_score = lr, score
    if not np.isfinite(best_score):
        logger.warning("every learning rate diverged; falling back to the smallest", extra={"metric": metric.name})
    logger.info("crossval selected", extra={"metric": metric.name, "learning_rate": best_lr, "mean_sharpness": best_score})
    return best_lr
