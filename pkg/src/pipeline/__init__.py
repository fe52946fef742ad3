"""
Pipeline helpers orchestrating multi-step workflows.

Dataset synthesis lives in ``dataset``; evaluation and benchmarking in
``evaluation``; ``run_autofocus`` is the command-line entry point.
"""

from .dataset import DatasetManifest, ManifestRecord, build_dataset

__all__ = [
    "DatasetManifest",
    "ManifestRecord",
    "build_dataset",
]
