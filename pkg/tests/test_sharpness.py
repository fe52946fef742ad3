import numpy as np
import pytest

from src.errors import UndefinedMetricError
from src.sharpness import (
    Metric,
    MetricKind,
    me,
    mns,
    osf,
    phase_gradient,
    sharpness,
    sharpness_grad,
    ssi,
)
from src.slc import PhasePolynomial, apply_phase, correct, fft_along_track, ifft_along_track
from src.weighting import weight_lowcontrast

ALL_KINDS = [MetricKind(Metric.MNS), MetricKind(Metric.ME), MetricKind(Metric.OSF), MetricKind(Metric.SSI)]


def _objective(kind, g_e, coeffs, weight_map=None):
    g_hat = correct(g_e, PhasePolynomial(coeffs))
    a = np.abs(g_hat)
    if weight_map is not None:
        a = weight_map * a
    return -sharpness(kind, a)


def _finite_difference(kind, g_e, coeffs, weight_map=None, h=1e-5):
    grad = np.zeros_like(coeffs)
    for i in range(coeffs.size):
        step = np.zeros_like(coeffs)
        step[i] = h
        grad[i] = (_objective(kind, g_e, coeffs + step, weight_map) - _objective(kind, g_e, coeffs - step, weight_map)) / (2 * h)
    return grad


def test_mns_hand_values():
    assert mns(np.array([[1.0, 1.0], [3.0, 3.0]])) == pytest.approx(0.5)
    assert mns(np.full((4, 4), 2.0 + 0j)) == 0.0
    g = np.array([[1.0, 2.0], [5.0, 0.5]])
    assert mns(7.5 * g) == pytest.approx(mns(g), rel=1e-12)
    with pytest.raises(UndefinedMetricError):
        mns(np.zeros((4, 4)))


def test_me_hand_values():
    assert me(np.ones((4, 4))) == 0.0
    assert me(np.zeros((4, 4))) == 0.0
    g = np.zeros((4, 4))
    g[1, 2] = np.exp(0.5)
    assert me(g) == pytest.approx(np.e, rel=1e-12)


def test_osf_hand_values():
    assert osf(np.ones((8, 8)), 1e-6) == pytest.approx(64 * np.log1p(1e-6), rel=1e-9)
    assert osf(np.zeros((8, 8)), 1e-6) == pytest.approx(64 * np.log(1e-6))
    assert osf(np.ones((1, 1)), 1.0) == pytest.approx(np.log(2.0))
    with pytest.raises(ValueError):
        osf(np.ones((2, 2)), 0.0)


def test_ssi_hand_values():
    assert ssi(np.full((2, 2), 2.0)) == pytest.approx(64.0)
    assert ssi(np.zeros((2, 2))) == 0.0
    concentrated = np.zeros((4, 4))
    concentrated[0, 0] = 4.0
    spread = np.ones((4, 4))
    # Same total energy (16); concentrating it maximizes SSI at E^2.
    assert ssi(concentrated) == pytest.approx(256.0)
    assert ssi(spread) < ssi(concentrated)


def test_unified_sharpness_orientation():
    a = np.array([[0.5, 2.0], [1.5, 3.0]])
    assert sharpness(MetricKind(Metric.ME), a) == pytest.approx(me(a))
    assert sharpness(MetricKind(Metric.OSF), a) == pytest.approx(-osf(a))
    assert sharpness(MetricKind(Metric.MNS), a) == pytest.approx(mns(a))


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.name)
def test_concentrated_energy_scores_sharper(kind):
    concentrated = np.zeros((4, 4))
    concentrated[0, 0] = 4.0
    spread = np.ones((4, 4))
    assert sharpness(kind, concentrated) > sharpness(kind, spread)


def test_metric_kind_parse():
    assert MetricKind.parse("OSF", b=1e-3) == MetricKind(Metric.OSF, b=1e-3)
    assert MetricKind.parse("me").name == "me"
    with pytest.raises(ValueError):
        MetricKind.parse("laplacian")
    with pytest.raises(ValueError):
        MetricKind(Metric.OSF, b=0.0)


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.name)
def test_metrics_ignore_per_pixel_phase(kind, random_slc, rng):
    g = random_slc(16)
    rotated = g * np.exp(1j * rng.uniform(-np.pi, np.pi, g.shape))
    assert sharpness(kind, np.abs(rotated)) == pytest.approx(sharpness(kind, np.abs(g)), rel=1e-9)


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.name)
def test_metrics_invariant_under_cyclic_shift(kind, random_slc):
    g = random_slc(16)
    shifted = np.roll(g, 5, axis=0)
    assert sharpness(kind, np.abs(shifted)) == pytest.approx(sharpness(kind, np.abs(g)), rel=1e-9)


@pytest.mark.parametrize("size", [8, 16, 32])
@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.name)
def test_sharpness_grad_matches_finite_differences(kind, size, rng):
    for _ in range(5):
        g_e = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        coeffs = rng.uniform(-0.5, 0.5, 9)
        analytic = sharpness_grad(kind, fft_along_track(g_e), PhasePolynomial(coeffs)).d_coeffs
        numeric = _finite_difference(kind, g_e, coeffs)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-4


def test_sharpness_grad_with_weight_matches_finite_differences(rng):
    kind = MetricKind(Metric.MNS)
    g_e = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    weight = weight_lowcontrast(3, 0.3)
    weight_map = weight(np.abs(g_e))
    coeffs = rng.uniform(-0.5, 0.5, 9)
    analytic = sharpness_grad(kind, fft_along_track(g_e), PhasePolynomial(coeffs), weight).d_coeffs
    numeric = _finite_difference(kind, g_e, coeffs, weight_map)
    assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-4


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.name)
def test_gradient_vanishes_for_single_bin_spectrum(kind, rng):
    spectrum = np.zeros((16, 16), dtype=complex)
    spectrum[0, :] = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    result = sharpness_grad(kind, spectrum, PhasePolynomial(rng.uniform(-1, 1, 9)))
    assert np.allclose(result.d_coeffs, 0.0, atol=1e-10)


def test_phase_gradient_returns_corrected_image(random_slc, rng):
    g_e = random_slc(16)
    spectrum = fft_along_track(g_e)
    phi = rng.uniform(-1, 1, 16)
    objective, d_phi, g_hat = phase_gradient(MetricKind(Metric.SSI), spectrum, phi)
    assert np.allclose(g_hat, ifft_along_track(apply_phase(spectrum, phi, -1)), atol=1e-12)
    assert objective == pytest.approx(-ssi(g_hat))
    assert d_phi.shape == (16,)
