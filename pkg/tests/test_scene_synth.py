import numpy as np
import pytest

from src.scene_synth import (
    MAX_PHASE_SCALE_RAD,
    SceneSpec,
    Texture,
    corrupt,
    derive_seed,
    gen_scene,
    ripple,
    sample_corruption,
    sample_scene_spec,
    shadow,
)
from src.settings import SceneSettings
from src.sharpness import mns
from src.slc import PhasePolynomial, correct, eval_phase


def test_gen_scene_is_deterministic():
    spec = SceneSpec(size=32, seed=99, scatterer_count=3, texture=ripple(8.0, 0.5, 0.3))
    assert np.array_equal(gen_scene(spec), gen_scene(spec))
    assert not np.array_equal(gen_scene(spec), gen_scene(SceneSpec(size=32, seed=100, scatterer_count=3)))


def test_flat_speckle_has_unit_mean_intensity():
    scene = gen_scene(SceneSpec(size=256, seed=5))
    assert np.mean(np.abs(scene) ** 2) == pytest.approx(1.0, rel=0.05)


def test_scatterers_stand_above_background():
    background = gen_scene(SceneSpec(size=64, seed=8))
    scene = gen_scene(SceneSpec(size=64, seed=8, scatterer_count=1, scatterer_snr_db=30.0))
    assert np.abs(scene).max() >= 10.0 * np.abs(background).mean()


def test_shadow_darkens_far_range():
    scene = gen_scene(SceneSpec(size=64, seed=2, texture=shadow(0.25)))
    near, far = np.abs(scene[:, :40]).mean(), np.abs(scene[:, 48:]).mean()
    assert far < 0.2 * near


def test_texture_validation():
    with pytest.raises(ValueError):
        Texture("ripple", wavelength_px=8.0, depth=1.5)
    with pytest.raises(ValueError):
        Texture("shadow", fraction=1.0)
    with pytest.raises(ValueError):
        Texture("sand")
    with pytest.raises(ValueError):
        SceneSpec(size=48, seed=0)


def test_sample_scene_spec_respects_ranges():
    settings = SceneSettings()
    for seed in range(20):
        spec = sample_scene_spec(32, seed, settings)
        assert 0 <= spec.scatterer_count <= settings.max_scatterers
        assert settings.scatterer_snr_db[0] <= spec.scatterer_snr_db <= settings.scatterer_snr_db[1]
        if spec.texture.kind == "ripple":
            assert settings.ripple_depth[0] <= spec.texture.depth <= settings.ripple_depth[1]


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert len({derive_seed(0, i) for i in range(100)}) == 100
    assert derive_seed(0, 1) != derive_seed(1, 0)


@pytest.mark.parametrize("seed", range(10))
def test_corruption_peak_equals_scale(seed):
    spec = sample_corruption(256, seed)
    peak = np.max(np.abs(eval_phase(spec.realized, 256)))
    assert peak == pytest.approx(abs(spec.scale), abs=1e-9)
    assert 2 <= spec.order <= 10
    assert len(spec.raw_coeffs) == spec.order - 1
    assert np.all(spec.realized.coeffs[spec.order - 1 :] == 0)
    assert abs(spec.scale) <= MAX_PHASE_SCALE_RAD


@pytest.mark.slow
def test_corruption_order_and_scale_distribution():
    specs = [sample_corruption(64, seed) for seed in range(100_000)]
    orders = np.array([s.order for s in specs])
    scales = np.array([s.scale for s in specs])
    for order in range(2, 11):
        assert np.mean(orders == order) == pytest.approx(1 / 9, abs=0.02)
    assert abs(scales.mean()) < 0.2
    assert scales.min() >= -18.0 and scales.max() <= 18.0


def test_corrupt_properties(speckle_scene):
    p = sample_corruption(64, 4).realized
    defocused = corrupt(speckle_scene, p)
    assert np.allclose(corrupt(speckle_scene, PhasePolynomial.zeros()), speckle_scene, atol=1e-12)
    assert np.sum(np.abs(defocused) ** 2) == pytest.approx(np.sum(np.abs(speckle_scene) ** 2), rel=1e-9)
    assert np.linalg.norm(correct(defocused, p) - speckle_scene) / np.linalg.norm(speckle_scene) < 1e-10
    assert mns(defocused) != pytest.approx(mns(speckle_scene), rel=1e-6)
