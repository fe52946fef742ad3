import math

import pandas as pd
import pytest

from src.pipeline.dataset import DatasetManifest
from src.validation import (
    assert_eval_records_valid,
    assert_manifest_valid,
    validate_eval_records,
    validate_manifest,
)


def _edited(manifest, **changes):
    frame = manifest.frame.copy()
    for column, (row, value) in changes.items():
        frame.loc[frame.index[row], column] = value
    return DatasetManifest(frame=frame, root=manifest.root)


def test_validate_manifest_reports_no_issues_for_generated_data(tiny_dataset):
    assert validate_manifest(tiny_dataset) == []
    assert_manifest_valid(tiny_dataset)


def test_validate_manifest_flags_duplicate_ids_and_unknown_splits(tiny_dataset):
    manifest = _edited(tiny_dataset, id=(1, "train_00000"), split=(2, "holdout"))
    issues = validate_manifest(manifest, check_files=False)
    assert any("Duplicate id train_00000" in issue for issue in issues)
    assert any("Unknown split 'holdout'" in issue for issue in issues)


def test_validate_manifest_flags_out_of_range_corruption(tiny_dataset):
    manifest = _edited(tiny_dataset, scale_rad=(0, 25.0), order=(1, 12))
    issues = validate_manifest(manifest, check_files=False)
    assert any("scale out of range" in issue for issue in issues)
    assert any("order out of range" in issue for issue in issues)


def test_validate_manifest_flags_coefficients_above_order(tiny_dataset):
    manifest = _edited(tiny_dataset, order=(0, 2), c10=(0, 50.0))
    issues = validate_manifest(manifest)
    assert any("Non-zero coefficients above order 2" in issue for issue in issues)
    assert any("Peak phase" in issue for issue in issues)


def test_validate_manifest_flags_missing_files(tiny_dataset):
    manifest = _edited(tiny_dataset, gt_path=(0, "gt/missing.slc"))
    issues = validate_manifest(manifest)
    assert any("Unreadable SLC" in issue for issue in issues)
    assert validate_manifest(manifest, check_files=False) == []
    with pytest.raises(ValueError):
        assert_manifest_valid(manifest)


def _eval_rows(**overrides):
    rows = {
        "id": ["test_00000", "test_00000", "test_00001", "test_00001"],
        "method": ["oracle", "mns-gd", "oracle", "mns-gd"],
        "psnr_db": [math.inf, 24.0, math.inf, 22.5],
        "ms_ssim": [1.0, 0.91, 1.0, 0.87],
        "mns_before": [2.0, 2.0, 1.8, 1.8],
        "mns_after": [2.6, 2.5, 2.3, 2.1],
        "runtime_s": [0.001, 0.08, 0.001, 0.07],
    }
    rows.update(overrides)
    return pd.DataFrame(rows)


def test_validate_eval_records_accepts_consistent_rows():
    assert validate_eval_records(_eval_rows()) == []
    assert validate_eval_records(_eval_rows().iloc[0:0]) == []


def test_validate_eval_records_flags_bad_rows():
    frame = _eval_rows(
        ms_ssim=[0.95, 0.97, 1.0, 1.2],
        runtime_s=[0.001, 0.0, 0.001, 0.07],
    )
    issues = validate_eval_records(frame)
    assert any("MS-SSIM out of bounds for test_00001 (mns-gd)" in issue for issue in issues)
    assert any("Non-positive runtime for test_00000 (mns-gd)" in issue for issue in issues)
    assert any("Oracle beaten on MS-SSIM by test_00000 (mns-gd)" in issue for issue in issues)
    with pytest.raises(ValueError):
        assert_eval_records_valid(frame)


def test_validate_eval_records_skips_failed_rows():
    frame = _eval_rows(
        ms_ssim=[1.0, math.nan, 1.0, 0.87],
        psnr_db=[math.inf, math.nan, math.inf, 22.5],
        runtime_s=[0.001, math.nan, 0.001, 0.07],
    )
    assert validate_eval_records(frame) == []
