"""
Mini-batch SGD training of the regressor on a synthetic manifest, with
per-epoch validation and best-checkpoint selection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.learned_autofocus.pipeline import LOSS_MODES, pipeline_backward, pipeline_forward
from src.learned_autofocus.regressor import RegressorParams
from src.errors import DivergenceError, NonFiniteError
from src.pipeline.dataset import DatasetManifest
from src.scene_synth import corrupt, derive_seed, make_rng, sample_corruption

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-2
    epochs: int = 200
    seed: int = 0
    fresh_corruption_per_epoch: bool = True
    loss_mode: str = "relative"
    zero_phase_input: bool = False
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"Unknown loss mode {self.loss_mode!r}; expected one of {LOSS_MODES}")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    selected_epoch: int = -1

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "epoch": np.arange(len(self.train_loss)),
                "train_loss": self.train_loss,
                "val_loss": self.val_loss,
            }
        )
        frame["selected"] = frame["epoch"] == self.selected_epoch
        return frame

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def mean_loss(
    images: Sequence[np.ndarray],
    params: RegressorParams,
    *,
    loss_mode: str = "relative",
    zero_phase_input: bool = False,
    n_jobs: int = 1,
) -> float:
    losses = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(pipeline_forward)(g_e, params, loss_mode=loss_mode, zero_phase_input=zero_phase_input) for g_e in images
    )
    return float(np.mean([out.loss for out in losses]))


def batch_gradient(
    images: Sequence[np.ndarray],
    params: RegressorParams,
    *,
    loss_mode: str = "relative",
    zero_phase_input: bool = False,
    n_jobs: int = 1,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and mean gradient over a mini-batch, reduced in input order."""
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(pipeline_backward)(g_e, params, loss_mode=loss_mode, zero_phase_input=zero_phase_input) for g_e in images
    )
    total = {name: np.zeros_like(params[name]) for name in params}
    for _, grads in results:
        for name in total:
            total[name] += grads[name]
    count = len(results)
    return float(np.mean([loss for loss, _ in results])), {name: grad / count for name, grad in total.items()}


def _epoch_train_images(
    ground_truth: Sequence[np.ndarray],
    stored: Sequence[np.ndarray],
    cfg: TrainConfig,
    epoch: int,
) -> list[np.ndarray]:
    if not cfg.fresh_corruption_per_epoch:
        return list(stored)
    epoch_seed = derive_seed(cfg.seed, epoch)
    images = []
    for index, g in enumerate(ground_truth):
        corruption = sample_corruption(g.shape[0], derive_seed(epoch_seed, index))
        images.append(corrupt(g, corruption.realized))
    return images


def train(
    manifest: DatasetManifest,
    cfg: TrainConfig,
    *,
    initial: Optional[RegressorParams] = None,
) -> tuple[RegressorParams, TrainHistory]:
    """
    Train with plain SGD; return the parameters with the lowest validation loss.

    Ties in validation loss keep the earliest epoch.
    """
    train_records = manifest.split("train")
    val_records = manifest.split("val")
    if not train_records or not val_records:
        raise ValueError("Training needs non-empty train and val splits")

    ground_truth = [record.load_ground_truth() for record in train_records] if cfg.fresh_corruption_per_epoch else []
    stored = [record.load_corrupted() for record in train_records]
    val_images = [record.load_corrupted() for record in val_records]

    params = initial.copy() if initial is not None else RegressorParams.glorot(cfg.seed)
    history = TrainHistory()
    best_params, best_val = params, np.inf
    rng = make_rng(cfg.seed, 0x5EED)
    opts = {"loss_mode": cfg.loss_mode, "zero_phase_input": cfg.zero_phase_input, "n_jobs": cfg.n_jobs}

    for epoch in range(cfg.epochs):
        images = _epoch_train_images(ground_truth, stored, cfg, epoch)
        order = rng.permutation(len(images))
        batch_losses = []
        try:
            for start in range(0, len(order), cfg.batch_size):
                batch = [images[i] for i in order[start : start + cfg.batch_size]]
                loss, grads = batch_gradient(batch, params, **opts)
                if not np.isfinite(loss):
                    raise NonFiniteError(f"batch loss is {loss}")
                params = params.step(grads, cfg.learning_rate)
                batch_losses.append(loss)
            val_loss = mean_loss(val_images, params, **opts)
        except (NonFiniteError, FloatingPointError) as exc:
            raise DivergenceError(f"Training diverged in epoch {epoch}: {exc}", epoch=epoch) from exc
        if not np.isfinite(val_loss):
            raise DivergenceError(f"Validation loss is non-finite in epoch {epoch}", epoch=epoch)
        history.train_loss.append(float(np.mean(batch_losses)))
        history.val_loss.append(val_loss)
        if val_loss < best_val:
            best_val, best_params, history.selected_epoch = val_loss, params, epoch
        logger.info(
            "epoch finished",
            extra={"epoch": epoch, "train_loss": history.train_loss[-1], "val_loss": val_loss, "best_epoch": history.selected_epoch},
        )

    logger.info("training finished", extra={"selected_epoch": history.selected_epoch, "best_val_loss": best_val})
    return best_params.copy(), history
