"""
Batch evaluation and run-time benchmarking of autofocus methods on a manifest split.

Responsibilities:
    * Build the named method registry (identity, oracle, four GD metrics, deep).
    * Per test image: correct, DRC and despeckle both ground truth and result,
      then score PSNR and MS-SSIM. Failures become NaN rows, not aborts.
    * Per-method summary statistics, including the worst MS-SSIM image.
    * Mean per-image runtime per method with a warm-up pass excluded.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.learned_autofocus.pipeline import infer
from src.learned_autofocus.regressor import RegressorParams
from src.gd_autofocus import FocusResult, GdConfig, crossval_lr, focus_gd
from src.iqa import IDENTICAL_MSE, DespeckleConfig, despeckle, ms_ssim, psnr
from src.pipeline.dataset import DatasetManifest, ManifestRecord
from src.sharpness import DEFAULT_OSF_B, Metric, MetricKind, mns
from src.slc import PhasePolynomial, correct, drc
from src.weighting import WeightFn, weight_identity

logger = logging.getLogger(__name__)

EVAL_COLUMNS = ["id", "method", "psnr_db", "ms_ssim", "mns_before", "mns_after", "runtime_s"]
BENCH_COLUMNS = ["method", "iterations", "mean_runtime_s"]
GD_SUFFIX = "-gd"
METHOD_NAMES = ("identity", "oracle", *(f"{m.value}{GD_SUFFIX}" for m in Metric), "deep")


@dataclass(frozen=True)
class AutofocusMethod:
    """A named correction applied to one corrupted image and its manifest record."""

    name: str
    iterations: int
    run: Callable[[np.ndarray, ManifestRecord], FocusResult]

    def __call__(self, g_e: np.ndarray, record: ManifestRecord) -> FocusResult:
        return self.run(g_e, record)


@dataclass(frozen=True)
class EvalRecord:
    id: str
    method: str
    psnr_db: float
    ms_ssim: float
    mns_before: float
    mns_after: float
    runtime_s: float

    @classmethod
    def failed(cls, image_id: str, method: str, mns_before: float = math.nan) -> "EvalRecord":
        return cls(image_id, method, math.nan, math.nan, mns_before, math.nan, math.nan)


# -- Method registry -------------------------------------------------------------


def _identity(g_e: np.ndarray, record: ManifestRecord) -> FocusResult:
    return FocusResult(g_hat=g_e.copy(), phi_hat=PhasePolynomial.zeros(), trace=())


def _oracle(g_e: np.ndarray, record: ManifestRecord) -> FocusResult:
    return FocusResult(g_hat=correct(g_e, record.corruption), phi_hat=record.corruption, trace=())


def gd_metric_name(method_name: str) -> Optional[str]:
    """``"mns-gd"`` -> ``"mns"``; ``None`` for non-GD methods."""
    if method_name.endswith(GD_SUFFIX):
        return method_name[: -len(GD_SUFFIX)]
    return None


def build_methods(
    names: Iterable[str],
    *,
    learning_rates: Mapping[str, float],
    iterations: int = 10,
    weight: Optional[WeightFn] = None,
    osf_b: float = DEFAULT_OSF_B,
    params: Optional[RegressorParams] = None,
    zero_phase_input: bool = False,
) -> list[AutofocusMethod]:
    """
    Resolve method names into callables.

    ``learning_rates`` is keyed by metric name (``"mns"`` etc.); every requested
    GD method must have an entry. ``deep`` requires ``params``.
    """
    weight = weight or weight_identity()
    methods: list[AutofocusMethod] = []
    for name in names:
        if name not in METHOD_NAMES:
            raise ValueError(f"Unknown method {name!r}; expected one of {METHOD_NAMES}")
        if name == "identity":
            methods.append(AutofocusMethod(name, 0, _identity))
        elif name == "oracle":
            methods.append(AutofocusMethod(name, 1, _oracle))
        elif name == "deep":
            if params is None:
                raise ValueError("Method 'deep' needs a trained checkpoint")
            regressor = params

            def _deep(g_e: np.ndarray, record: ManifestRecord, _params=regressor) -> FocusResult:
                return infer(g_e, _params, zero_phase_input=zero_phase_input)

            methods.append(AutofocusMethod(name, 1, _deep))
        else:
            metric = gd_metric_name(name)
            if metric not in learning_rates:
                raise ValueError(f"No learning rate for {name}; cross-validate it first")
            cfg = GdConfig(
                metric=MetricKind.parse(metric, b=osf_b),
                learning_rate=float(learning_rates[metric]),
                iterations=iterations,
                weight=weight,
            )

            def _gd(g_e: np.ndarray, record: ManifestRecord, _cfg=cfg) -> FocusResult:
                return focus_gd(g_e, _cfg)

            methods.append(AutofocusMethod(name, iterations, _gd))
    return methods


def resolve_learning_rates(
    manifest: DatasetManifest,
    method_names: Iterable[str],
    configured: Mapping[str, float],
    *,
    grid: Sequence[float],
    iterations: int = 10,
    weight: Optional[WeightFn] = None,
    osf_b: float = DEFAULT_OSF_B,
    split: str = "test",
    n_jobs: int = 1,
) -> dict[str, float]:
    """Configured learning rates, plus a cross-validated one for every GD metric lacking one."""
    rates = dict(configured)
    missing = [m for m in (gd_metric_name(n) for n in method_names) if m is not None and m not in rates]
    if not missing:
        return rates
    images = [record.load_corrupted() for record in manifest.split(split)]
    for metric in missing:
        rates[metric] = crossval_lr(
            images,
            MetricKind.parse(metric, b=osf_b),
            grid,
            iterations=iterations,
            weight=weight,
            n_jobs=n_jobs,
        )
    return rates


# -- Evaluation ------------------------------------------------------------------


def display_image(g: np.ndarray, cfg: DespeckleConfig) -> np.ndarray:
    """DRC, despeckle, and clip to [0, 1]: the domain every quality score is taken in."""
    return np.clip(despeckle(drc(g), cfg), 0.0, 1.0)


def _evaluate_record(
    record: ManifestRecord,
    methods: Sequence[AutofocusMethod],
    despeckle_cfg: DespeckleConfig,
    identical_mse: float,
) -> list[EvalRecord]:
    g_true = record.load_ground_truth()
    g_e = record.load_corrupted()
    try:
        mns_before = mns(g_e)
        reference = display_image(g_true, despeckle_cfg)
    except (ArithmeticError, ValueError) as exc:
        logger.warning("reference failed", extra={"id": record.id, "error": f"{type(exc).__name__}: {exc}"})
        return [EvalRecord.failed(record.id, method.name) for method in methods]

    rows = []
    for method in methods:
        try:
            start = time.perf_counter()
            result = method(g_e, record)
            runtime = time.perf_counter() - start
            test = display_image(result.g_hat, despeckle_cfg)
            rows.append(
                EvalRecord(
                    id=record.id,
                    method=method.name,
                    psnr_db=psnr(reference, test, identical_mse=identical_mse),
                    ms_ssim=ms_ssim(reference, test),
                    mns_before=mns_before,
                    mns_after=mns(result.g_hat),
                    runtime_s=runtime,
                )
            )
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            logger.warning(
                "method failed",
                extra={"id": record.id, "method": method.name, "error": f"{type(exc).__name__}: {exc}"},
            )
            rows.append(EvalRecord.failed(record.id, method.name, mns_before))
    return rows


def records_frame(records: Iterable[EvalRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=EVAL_COLUMNS)


def write_records(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", na_rep="nan")
    return path


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Per-method mean/min/max of PSNR and MS-SSIM plus the id of the image with
    the lowest MS-SSIM. Methods keep their first-appearance order.
    """
    order = list(dict.fromkeys(frame["method"]))
    stats = frame.groupby("method", sort=False).agg(
        psnr_mean=("psnr_db", "mean"),
        psnr_min=("psnr_db", "min"),
        psnr_max=("psnr_db", "max"),
        ms_ssim_mean=("ms_ssim", "mean"),
        ms_ssim_min=("ms_ssim", "min"),
        ms_ssim_max=("ms_ssim", "max"),
        failures=("ms_ssim", lambda s: int(s.isna().sum())),
    )
    worst = {}
    for method, group in frame.groupby("method", sort=False):
        scored = group.dropna(subset=["ms_ssim"])
        worst[method] = scored.loc[scored["ms_ssim"].idxmin(), "id"] if not scored.empty else ""
    stats["worst_ms_ssim_id"] = pd.Series(worst)
    return stats.loc[order].reset_index()


def evaluate(
    manifest: DatasetManifest,
    methods: Sequence[AutofocusMethod],
    out_csv: Optional[Path] = None,
    *,
    split: str = "test",
    despeckle_cfg: DespeckleConfig = DespeckleConfig(),
    identical_mse: float = IDENTICAL_MSE,
    n_jobs: int = 1,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    Score every method on every image of ``split``.

    Returns
    -------
    (records, summary):
        One row per (image, method) in manifest order, and the per-method summary.
    """
    records = manifest.split(split)
    if not records:
        raise ValueError(f"Split {split!r} is empty")
    if not methods:
        raise ValueError("evaluate needs at least one method")

    logger.info("evaluation started", extra={"images": len(records), "methods": [m.name for m in methods]})
    per_image = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_evaluate_record)(record, methods, despeckle_cfg, identical_mse) for record in records
    )
    frame = records_frame(row for rows in per_image for row in rows)
    if out_csv is not None:
        path = write_records(frame, out_csv)
        logger.info("evaluation written", extra={"path": str(path), "rows": len(frame)})
    return frame, summarize(frame)


# -- Benchmark -------------------------------------------------------------------


def bench(
    manifest: DatasetManifest,
    methods: Sequence[AutofocusMethod],
    *,
    split: str = "test",
) -> pd.DataFrame:
    """
    Mean per-image correction time for each method.

    Images are loaded up front and the first one is run once untimed per method.
    """
    records = manifest.split(split)
    if not records:
        raise ValueError(f"Split {split!r} is empty")
    images = [record.load_corrupted() for record in records]

    rows = []
    for method in methods:
        method(images[0], records[0])
        elapsed = 0.0
        for g_e, record in zip(images, records):
            start = time.perf_counter()
            method(g_e, record)
            elapsed += time.perf_counter() - start
        rows.append({"method": method.name, "iterations": method.iterations, "mean_runtime_s": elapsed / len(images)})
    frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    _log_speedup(frame)
    return frame


def _log_speedup(frame: pd.DataFrame) -> None:
    timings = frame.set_index("method")["mean_runtime_s"]
    if "deep" not in timings.index:
        return
    for name in timings.index:
        if gd_metric_name(name) is None or timings["deep"] <= 0:
            continue
        logger.info(
            "runtime ratio",
            extra={"method": name, "versus": "deep", "ratio": float(timings[name] / timings["deep"])},
        )
