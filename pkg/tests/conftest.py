import logging
import sys
from pathlib import Path

import numpy as np
import pytest


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.pipeline.dataset import build_dataset  # noqa: E402
from src.scene_synth import SceneSpec, gen_scene  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def speckle_scene():
    """64x64 flat speckle scene with a few bright scatterers."""
    return gen_scene(SceneSpec(size=64, seed=7, scatterer_count=4, scatterer_snr_db=25.0))


@pytest.fixture
def random_slc(rng):
    def _make(size=16):
        return rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))

    return _make


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Two images per split at 32x32, shared across tests that only read it."""
    out_dir = tmp_path_factory.mktemp("synthetic")
    return build_dataset(2, 2, 2, base_seed=11, out_dir=out_dir, size=32)


@pytest.fixture(autouse=True)
def _reset_src_logger():
    """Undo handlers the CLI attaches so caplog keeps seeing library records."""
    yield
    logger = logging.getLogger("src")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
