"""
Validation helpers for dataset manifests and evaluation records.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from src.pipeline.dataset import SPLITS, DatasetManifest
from src.scene_synth import MAX_PHASE_SCALE_RAD
from src.slc import DEGREES, MIN_DEGREE, PhasePolynomial, eval_phase, read_slc


def _format_identifier(row: pd.Series) -> str:
    image_id = row.get("id", "UNKNOWN")
    method = row.get("method")
    return f"{image_id} ({method})" if method is not None else str(image_id)


def validate_manifest(
    manifest: DatasetManifest,
    *,
    check_files: bool = True,
    peak_tolerance: float = 1e-9,
) -> list[str]:
    """
    Inspect a dataset manifest and report structural or numerical problems.

    Checks unique ids, known splits, corruption order and scale ranges, zero
    coefficients above the drawn order, the peak |phi| = |scale| identity, and
    (optionally) that every referenced SLC1 file parses with a matching size.
    Returns a list of human-readable issue strings; empty means all checks passed.
    """
    issues: list[str] = []
    frame = manifest.frame
    if frame.empty:
        return ["Manifest has no records"]

    duplicated = frame.loc[frame["id"].duplicated(), "id"]
    for image_id in duplicated:
        issues.append(f"Duplicate id {image_id}")

    unknown = frame.loc[~frame["split"].isin(SPLITS)]
    for _, row in unknown.iterrows():
        issues.append(f"Unknown split {row['split']!r} for {_format_identifier(row)}")

    bad_order = frame.loc[~frame["order"].between(DEGREES[0], DEGREES[-1])]
    for _, row in bad_order.iterrows():
        issues.append(f"Corruption order out of range for {_format_identifier(row)}: {row['order']}")

    bad_scale = frame.loc[frame["scale_rad"].abs() > MAX_PHASE_SCALE_RAD]
    for _, row in bad_scale.iterrows():
        issues.append(f"Corruption scale out of range for {_format_identifier(row)}: {row['scale_rad']:.3f}")

    sizes: dict[str, int] = {}
    for record in manifest.records():
        coeffs = record.corruption.coeffs
        above = coeffs[record.order - MIN_DEGREE + 1 :]
        if np.any(above != 0):
            issues.append(f"Non-zero coefficients above order {record.order} for {record.id}")

        if check_files:
            try:
                gt = read_slc(record.gt_path)
                corrupted = read_slc(record.corrupt_path)
            except (OSError, ValueError) as exc:
                issues.append(f"Unreadable SLC for {record.id}: {exc}")
                continue
            if gt.shape != corrupted.shape:
                issues.append(f"Ground truth {gt.shape} and corrupted {corrupted.shape} differ for {record.id}")
                continue
            sizes[record.id] = gt.shape[0]
            peak = float(np.max(np.abs(eval_phase(PhasePolynomial(coeffs), gt.shape[0]))))
            if abs(peak - abs(record.scale_rad)) > peak_tolerance * max(1.0, abs(record.scale_rad)):
                issues.append(f"Peak phase {peak:.6f} does not match |scale| {abs(record.scale_rad):.6f} for {record.id}")

    if len(set(sizes.values())) > 1:
        issues.append(f"Mixed image sizes in manifest: {sorted(set(sizes.values()))}")
    return issues


def assert_manifest_valid(manifest: DatasetManifest, **kwargs) -> None:
    """
    Raise ValueError when validation issues are detected.
    """
    issues = validate_manifest(manifest, **kwargs)
    if issues:
        formatted = "\n".join(f"- {issue}" for issue in issues)
        raise ValueError(f"Manifest validation failed with {len(issues)} issue(s):\n{formatted}")


def validate_eval_records(records: pd.DataFrame) -> list[str]:
    """
    Check evaluation rows: MS-SSIM in [0, 1], positive runtimes, and an oracle
    that is never beaten on MS-SSIM. NaN rows (recorded failures) are skipped.
    """
    issues: list[str] = []
    if records.empty:
        return issues

    scored = records.dropna(subset=["ms_ssim"])
    mask = ~scored["ms_ssim"].between(0.0, 1.0)
    for _, row in scored.loc[mask].iterrows():
        issues.append(f"MS-SSIM out of bounds for {_format_identifier(row)}: {row['ms_ssim']:.6f}")

    timed = records.dropna(subset=["runtime_s"])
    for _, row in timed.loc[timed["runtime_s"] <= 0].iterrows():
        issues.append(f"Non-positive runtime for {_format_identifier(row)}: {row['runtime_s']:.3g}")

    if "oracle" in set(scored["method"]):
        oracle = scored.loc[scored["method"] == "oracle"].set_index("id")["ms_ssim"]
        others = scored.loc[(scored["method"] != "oracle") & scored["id"].isin(oracle.index)]
        # Tolerance covers float32 storage of the corrupted image.
        beaten = others["ms_ssim"].to_numpy() > oracle.loc[others["id"]].to_numpy() + 1e-6
        for _, row in others.loc[beaten].iterrows():
            issues.append(f"Oracle beaten on MS-SSIM by {_format_identifier(row)}: {row['ms_ssim']:.6f}")

    return issues


def assert_eval_records_valid(records: pd.DataFrame) -> None:
    """
    Raise ValueError when validation issues are detected.
    """
    issues = validate_eval_records(records)
    if issues:
        formatted = "\n".join(f"- {issue}" for issue in issues)
        raise ValueError(f"Evaluation validation failed with {len(issues)} issue(s):\n{formatted}")
