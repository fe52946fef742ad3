import numpy as np
import pytest
from PIL import Image

from src.errors import (
    DegenerateStatisticsError,
    NonFiniteError,
    ShapeMismatchError,
    SlcFormatError,
    SlcSizeError,
    SlcTruncatedError,
)
from src.slc import (
    PhasePolynomial,
    aperture_coordinates,
    apply_phase,
    correct,
    drc,
    eval_phase,
    export_drc,
    fft_along_track,
    ifft_along_track,
    phase_basis,
    phase_map,
    read_slc,
    to_uint8,
    validate_slc,
    write_slc,
)
from src.scene_synth import corrupt


def _poly(**degrees):
    coeffs = np.zeros(9)
    for key, value in degrees.items():
        coeffs[int(key[1:]) - 2] = value
    return PhasePolynomial(coeffs)


def test_fft_of_constant_column_is_dc_only():
    g = np.zeros((8, 8), dtype=complex)
    g[:, 0] = 1.0
    spectrum = fft_along_track(g)
    assert spectrum[0, 0] == pytest.approx(np.sqrt(8))
    assert np.allclose(spectrum[1:, 0], 0.0)
    assert np.allclose(spectrum[:, 1:], 0.0)


def test_fft_of_impulse_is_flat():
    g = np.zeros((16, 16), dtype=complex)
    g[0, :] = 1.0
    spectrum = fft_along_track(g)
    assert np.allclose(np.abs(spectrum), 1.0 / 4.0)


def test_fft_round_trip_and_parseval(random_slc):
    g = random_slc(32)
    spectrum = fft_along_track(g)
    assert np.linalg.norm(ifft_along_track(spectrum) - g) / np.linalg.norm(g) < 1e-10
    assert np.sum(np.abs(spectrum) ** 2) == pytest.approx(np.sum(np.abs(g) ** 2), rel=1e-9)


def test_ifft_is_linear(random_slc):
    a, b = random_slc(16), random_slc(16)
    combined = ifft_along_track(2.0 * a - 0.5j * b)
    assert np.allclose(combined, 2.0 * ifft_along_track(a) - 0.5j * ifft_along_track(b), atol=1e-10)
    assert np.all(ifft_along_track(np.zeros((16, 16), dtype=complex)) == 0)


@pytest.mark.parametrize(
    "shape, error",
    [((8, 16), SlcSizeError), ((12, 12), SlcSizeError), ((4, 4), SlcSizeError), ((8,), SlcSizeError)],
)
def test_validate_slc_rejects_bad_shapes(shape, error):
    with pytest.raises(error):
        validate_slc(np.ones(shape, dtype=complex))


def test_validate_slc_rejects_non_finite():
    g = np.ones((8, 8), dtype=complex)
    g[3, 3] = np.nan
    with pytest.raises(NonFiniteError):
        fft_along_track(g)


def test_eval_phase_hand_values():
    assert np.allclose(aperture_coordinates(3), [-1.0, 0.0, 1.0])
    assert np.allclose(eval_phase(_poly(c2=1.0), 3), [1.0, 0.0, 1.0])
    assert np.allclose(eval_phase(_poly(c3=2.0), 3), [-2.0, 0.0, 2.0])
    assert np.all(eval_phase(PhasePolynomial.zeros(), 64) == 0)
    assert phase_basis(64).shape == (64, 9)


def test_eval_phase_is_linear(rng):
    p1, p2 = PhasePolynomial(rng.standard_normal(9)), PhasePolynomial(rng.standard_normal(9))
    combined = PhasePolynomial(3.0 * p1.coeffs - 2.0 * p2.coeffs)
    assert np.allclose(eval_phase(combined, 32), 3.0 * eval_phase(p1, 32) - 2.0 * eval_phase(p2, 32), atol=1e-12)


def test_phase_polynomial_validates_length():
    with pytest.raises(ShapeMismatchError):
        PhasePolynomial(np.zeros(8))
    p = _poly(c4=1.5)
    assert p.coefficient(4) == 1.5
    assert (-p).coefficient(4) == -1.5
    with pytest.raises(ValueError):
        p.coefficient(1)


def test_apply_phase_inverse_and_global_phase(random_slc, rng):
    spectrum = fft_along_track(random_slc(16))
    phi = rng.uniform(-3, 3, 16)
    restored = apply_phase(apply_phase(spectrum, phi, 1), phi, -1)
    assert np.allclose(restored, spectrum, atol=1e-12)
    assert np.array_equal(apply_phase(spectrum, np.zeros(16), 1), spectrum)

    shifted = ifft_along_track(apply_phase(spectrum, np.full(16, 0.7), 1))
    assert np.allclose(np.abs(shifted), np.abs(ifft_along_track(spectrum)), atol=1e-12)


def test_apply_phase_rejects_bad_inputs(random_slc):
    spectrum = fft_along_track(random_slc(16))
    with pytest.raises(ShapeMismatchError):
        apply_phase(spectrum, np.zeros(8), 1)
    with pytest.raises(ValueError):
        apply_phase(spectrum, np.zeros(16), 2)


def test_linear_phase_ramp_is_a_cyclic_shift(random_slc):
    g = random_slc(16)
    n = np.arange(16)
    shifted = ifft_along_track(apply_phase(fft_along_track(g), 2.0 * np.pi * 3 * n / 16, 1))
    assert np.allclose(np.sort(np.abs(shifted).ravel()), np.sort(np.abs(g).ravel()), atol=1e-10)


def test_correct_inverts_corrupt(speckle_scene):
    p = _poly(c2=8.0, c3=-3.0, c6=2.5)
    restored = correct(corrupt(speckle_scene, p), p)
    assert np.linalg.norm(restored - speckle_scene) / np.linalg.norm(speckle_scene) < 1e-10


def test_drc_anchors_median_and_max(speckle_scene):
    out = drc(speckle_scene)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert out.max() == pytest.approx(1.0)
    # Even pixel counts average the two middle values, so the anchor is approximate.
    assert np.median(out) == pytest.approx(0.2, abs=1e-3)


def test_drc_is_monotone_and_maps_zero_to_zero():
    magnitude = np.linspace(0.0, 1.0, 64).reshape(8, 8)
    out = drc(magnitude.astype(complex))
    assert out.ravel()[0] == 0.0
    assert np.all(np.diff(out.ravel()) >= 0)


def test_drc_rejects_degenerate_images():
    with pytest.raises(DegenerateStatisticsError):
        drc(np.zeros((8, 8), dtype=complex))
    with pytest.raises(DegenerateStatisticsError):
        drc(np.ones((8, 8), dtype=complex))
    sparse = np.zeros((8, 8), dtype=complex)
    sparse[0, 0] = 1.0
    with pytest.raises(DegenerateStatisticsError):
        drc(sparse)


def test_phase_map_branch_conventions():
    g = np.array([[2.0, 3j], [-1.5, 0.0]])
    assert np.allclose(phase_map(g), [[0.0, 0.5], [-1.0, 0.0]])


def test_slc_file_round_trip_is_bit_exact(tmp_path, random_slc):
    g = random_slc(16).astype(np.complex64).astype(np.complex128)
    path = write_slc(g, tmp_path / "image.slc")
    assert path.stat().st_size == 12 + 16 * 16 * 8
    assert np.array_equal(read_slc(path), g)


def test_read_slc_rejects_bad_files(tmp_path, random_slc):
    good = write_slc(random_slc(8), tmp_path / "good.slc").read_bytes()

    bad_magic = tmp_path / "magic.slc"
    bad_magic.write_bytes(b"XXXX" + good[4:])
    with pytest.raises(SlcFormatError):
        read_slc(bad_magic)

    truncated = tmp_path / "short.slc"
    truncated.write_bytes(good[:-10])
    with pytest.raises(SlcTruncatedError):
        read_slc(truncated)

    trailing = tmp_path / "long.slc"
    trailing.write_bytes(good + b"\x00")
    with pytest.raises(SlcFormatError):
        read_slc(trailing)

    nan_file = tmp_path / "nan.slc"
    payload = bytearray(good)
    payload[12:16] = np.array([np.nan], dtype="<f4").tobytes()
    nan_file.write_bytes(bytes(payload))
    with pytest.raises(NonFiniteError):
        read_slc(nan_file)


def test_export_drc_writes_png_and_pgm(tmp_path):
    img = np.linspace(0.0, 1.0, 64).reshape(8, 8)
    png = export_drc(img, tmp_path / "out.png")
    with Image.open(png) as loaded:
        assert np.array_equal(np.asarray(loaded), to_uint8(img))

    pgm = export_drc(img, tmp_path / "out.pgm").read_bytes()
    header = b"P5\n8 8\n255\n"
    assert pgm.startswith(header)
    assert np.frombuffer(pgm[len(header) :], dtype=np.uint8).tolist() == to_uint8(img).ravel().tolist()
