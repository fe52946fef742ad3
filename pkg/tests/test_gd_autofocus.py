import logging

import numpy as np
import pytest

from src.errors import DivergenceError
from src.gd_autofocus import DEFAULT_LR_GRID, GdConfig, crossval_lr, focus_gd
from src.scene_synth import SceneSpec, corrupt, gen_scene
from src.sharpness import Metric, MetricKind, mns
from src.slc import PhasePolynomial, correct
from src.weighting import weight_lowcontrast

MNS = MetricKind(Metric.MNS)


@pytest.fixture
def quadratic_defocus():
    scene = gen_scene(SceneSpec(size=64, seed=3, scatterer_count=6, scatterer_snr_db=30.0))
    coeffs = np.zeros(9)
    coeffs[0] = 5.0
    return scene, corrupt(scene, PhasePolynomial(coeffs))


def test_default_grid_is_ten_decades():
    assert len(DEFAULT_LR_GRID) == 10
    assert DEFAULT_LR_GRID[0] == pytest.approx(1e-6)
    assert DEFAULT_LR_GRID[-1] == pytest.approx(1e3)


def test_zero_learning_rate_is_a_fixed_point(speckle_scene):
    result = focus_gd(speckle_scene, GdConfig(metric=MNS, learning_rate=0.0, iterations=3))
    assert np.all(result.phi_hat.coeffs == 0)
    assert np.array_equal(result.g_hat, speckle_scene)
    assert len(result.trace) == 3


def test_single_iteration_records_one_trace_value(speckle_scene):
    result = focus_gd(speckle_scene, GdConfig(metric=MNS, learning_rate=1.0, iterations=1))
    assert len(result.trace) == 1
    assert result.trace[0] == pytest.approx(-mns(speckle_scene))


def test_result_matches_shared_correction(quadratic_defocus):
    _, defocused = quadratic_defocus
    result = focus_gd(defocused, GdConfig(metric=MNS, learning_rate=10.0))
    assert np.array_equal(result.g_hat, correct(defocused, result.phi_hat))


def test_focus_gd_is_deterministic(quadratic_defocus):
    _, defocused = quadratic_defocus
    cfg = GdConfig(metric=MetricKind(Metric.OSF), learning_rate=1e-3, weight=weight_lowcontrast(5, 0.25))
    first, second = focus_gd(defocused, cfg), focus_gd(defocused, cfg)
    assert np.array_equal(first.g_hat, second.g_hat)
    assert first.trace == second.trace


def test_mns_gd_sharpens_quadratic_defocus(quadratic_defocus):
    _, defocused = quadratic_defocus
    lr = crossval_lr([defocused], MNS)
    result = focus_gd(defocused, GdConfig(metric=MNS, learning_rate=lr, iterations=10))
    assert mns(result.g_hat) > mns(defocused)

    cautious = focus_gd(defocused, GdConfig(metric=MNS, learning_rate=lr / 1000, iterations=10))
    assert np.all(np.diff(cautious.trace) <= 0)


def test_huge_learning_rate_diverges(quadratic_defocus):
    _, defocused = quadratic_defocus
    cfg = GdConfig(metric=MetricKind(Metric.SSI), learning_rate=1e300, iterations=5)
    with pytest.raises(DivergenceError) as excinfo:
        focus_gd(defocused, cfg)
    assert excinfo.value.iteration is not None


def test_gd_config_validation():
    with pytest.raises(ValueError):
        GdConfig(metric=MNS, learning_rate=1.0, iterations=0)
    with pytest.raises(ValueError):
        GdConfig(metric=MNS, learning_rate=-1.0)


def test_crossval_single_element_grid(speckle_scene):
    assert crossval_lr([speckle_scene], MNS, [0.5]) == 0.5


def test_crossval_is_order_invariant(quadratic_defocus, speckle_scene):
    _, defocused = quadratic_defocus
    grid = [1e-2, 1e0, 1e2]
    forward = crossval_lr([defocused, speckle_scene], MNS, grid, iterations=3)
    backward = crossval_lr([speckle_scene, defocused], MNS, grid, iterations=3, n_jobs=2)
    assert forward == backward


def test_crossval_tie_goes_to_smaller_rate(speckle_scene, monkeypatch):
    monkeypatch.setattr("src.gd_autofocus._score_learning_rate", lambda *args: 1.0)
    assert crossval_lr([speckle_scene], MNS, [1.0, 1e-3, 10.0], iterations=2) == 1e-3


def test_crossval_falls_back_when_everything_diverges(quadratic_defocus, caplog):
    _, defocused = quadratic_defocus
    with caplog.at_level(logging.WARNING, logger="src.gd_autofocus"):
        lr = crossval_lr([defocused], MetricKind(Metric.SSI), [1e300, 1e305], iterations=3)
    assert lr == 1e300
    assert any("diverged" in record.getMessage() for record in caplog.records)


def test_crossval_rejects_empty_inputs(speckle_scene):
    with pytest.raises(ValueError):
        crossval_lr([], MNS)
    with pytest.raises(ValueError):
        crossval_lr([speckle_scene], MNS, [])


@pytest.mark.slow
def test_crossvalidated_mns_descent_is_mostly_monotone(quadratic_defocus):
    _, defocused = quadratic_defocus
    lr = crossval_lr([defocused], MNS)
    result = focus_gd(defocused, GdConfig(metric=MNS, learning_rate=lr, iterations=10))
    objectives = np.array([*result.trace, -mns(result.g_hat)])
    steps = np.diff(objectives)
    assert steps.size == 10
    assert np.count_nonzero(steps <= 0) >= 8
    assert mns(result.g_hat) > mns(defocused)
