"""
Dataset synthesis: ground-truth scenes, one corruption per image, SLC1 files and
a CSV manifest.

Layout under ``out_dir``::

    manifest.csv
    gt/<id>.slc
    corrupt/<id>.slc

Paths in the manifest are relative to the manifest's directory so a dataset can
be moved or compared byte-for-byte across machines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.settings import SceneSettings
from src.scene_synth import corrupt, derive_seed, gen_scene, sample_corruption, sample_scene_spec
from src.slc import DEGREES, PhasePolynomial, read_slc, write_slc

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
MANIFEST_NAME = "manifest.csv"
COEFF_COLUMNS = [f"c{d}" for d in DEGREES]
MANIFEST_COLUMNS = ["id", "split", "gt_path", "corrupt_path", "order", "scale_rad", *COEFF_COLUMNS]


@dataclass(frozen=True, eq=False)
class ManifestRecord:
    """One ground-truth / corrupted pair."""

    id: str
    split: str
    gt_path: Path
    corrupt_path: Path
    order: int
    scale_rad: float
    corruption: PhasePolynomial

    def load_ground_truth(self) -> np.ndarray:
        return read_slc(self.gt_path)

    def load_corrupted(self) -> np.ndarray:
        return read_slc(self.corrupt_path)


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Manifest table plus the directory its relative paths resolve against."""

    frame: pd.DataFrame
    root: Path

    def __len__(self) -> int:
        return len(self.frame)

    def split(self, name: str) -> list[ManifestRecord]:
        if name not in SPLITS:
            raise ValueError(f"Unknown split {name!r}; expected one of {SPLITS}")
        return list(self._records(self.frame.loc[self.frame["split"] == name]))

    def records(self) -> list[ManifestRecord]:
        return list(self._records(self.frame))

    def _records(self, frame: pd.DataFrame) -> Iterator[ManifestRecord]:
        for row in frame.itertuples(index=False):
            yield ManifestRecord(
                id=str(row.id),
                split=str(row.split),
                gt_path=self.root / row.gt_path,
                corrupt_path=self.root / row.corrupt_path,
                order=int(row.order),
                scale_rad=float(row.scale_rad),
                corruption=PhasePolynomial([getattr(row, col) for col in COEFF_COLUMNS]),
            )

    def to_csv(self, path: Optional[Path] = None) -> Path:
        out_path = Path(path) if path is not None else self.root / MANIFEST_NAME
        out_path.parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(out_path, index=False, float_format="%.17g")
        return out_path

    @classmethod
    def from_csv(cls, path: Path) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Manifest not found: {path}")
        frame = pd.read_csv(path, dtype={"id": str, "split": str}, float_precision="round_trip")
        missing = [col for col in MANIFEST_COLUMNS if col not in frame.columns]
        if missing:
            raise ValueError(f"Manifest {path} is missing columns: {missing}")
        return cls(frame=frame.loc[:, MANIFEST_COLUMNS], root=path.resolve().parent)


def _build_one(index: int, split: str, size: int, base_seed: int, out_dir: Path, scene_settings: SceneSettings) -> dict:
    image_id = f"{split}_{index:05d}"
    seed = derive_seed(base_seed, index)
    scene = gen_scene(sample_scene_spec(size, seed, scene_settings))
    # Quantize before corrupting so the stored pair matches what SLC1 can hold.
    ground_truth = scene.astype(np.complex64).astype(np.complex128)
    corruption = sample_corruption(size, seed)
    corrupted = corrupt(ground_truth, corruption.realized)

    gt_rel = Path("gt") / f"{image_id}.slc"
    corrupt_rel = Path("corrupt") / f"{image_id}.slc"
    write_slc(ground_truth, out_dir / gt_rel)
    write_slc(corrupted, out_dir / corrupt_rel)

    record = {
        "id": image_id,
        "split": split,
        "gt_path": gt_rel.as_posix(),
        "corrupt_path": corrupt_rel.as_posix(),
        "order": corruption.order,
        "scale_rad": corruption.scale,
    }
    record.update(dict(zip(COEFF_COLUMNS, corruption.realized.coeffs.tolist())))
    return record


def build_dataset(
    count_train: int = 120,
    count_val: int = 120,
    count_test: int = 264,
    base_seed: int = 0,
    out_dir: Path = Path("data/synthetic"),
    *,
    size: int = 256,
    scene_settings: Optional[SceneSettings] = None,
    n_jobs: int = 1,
) -> DatasetManifest:
    """
    Generate, corrupt once, and write every image; return the saved manifest.

    Image ``i`` (counted across splits in train, val, test order) uses
    ``derive_seed(base_seed, i)`` for both its scene and its corruption.
    """
    counts = {"train": count_train, "val": count_val, "test": count_test}
    bad = {name: count for name, count in counts.items() if count < 1}
    if bad:
        raise ValueError(f"Every split needs at least one image, got {bad}")
    scene_settings = scene_settings or SceneSettings()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    index = 0
    for split in SPLITS:
        for _ in range(counts[split]):
            jobs.append((index, split))
            index += 1

    logger.info("building dataset", extra={"images": len(jobs), "size": size, "base_seed": base_seed, "out_dir": str(out_dir)})
    records = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_build_one)(i, split, size, base_seed, out_dir, scene_settings) for i, split in jobs
    )
    manifest = DatasetManifest(frame=pd.DataFrame.from_records(records, columns=MANIFEST_COLUMNS), root=out_dir.resolve())
    path = manifest.to_csv()
    logger.info("dataset written", extra={"manifest": str(path), "records": len(manifest)})
    return manifest
