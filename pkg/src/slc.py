"""
Single-look-complex (SLC) image primitives.

Responsibilities:
    * Validate square, power-of-two complex images.
    * Unitary along-track (axis 0) Fourier transforms into and out of k-space.
    * Phase-polynomial evaluation and k-space phase application.
    * Display transforms: rational dynamic range compression and phase maps.
    * SLC1 file I/O and 8-bit export of display images.

Images are plain ``numpy`` arrays: complex128 for SLCs and spectra, float64 for
DRC and phase maps. Nothing here mutates its inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import scipy.fft
from PIL import Image

from src.errors import (
    DegenerateStatisticsError,
    NonFiniteError,
    ShapeMismatchError,
    SlcFormatError,
    SlcSizeError,
    SlcTruncatedError,
)

PathLike = Union[str, Path]

MIN_DEGREE = 2
MAX_DEGREE = 10
NUM_COEFFS = MAX_DEGREE - MIN_DEGREE + 1
DEGREES = tuple(range(MIN_DEGREE, MAX_DEGREE + 1))

SLC_MAGIC = b"SLC1"
_SLC_HEADER = struct.Struct("<4sII")

DRC_MEDIAN_TARGET = 0.2


@dataclass(frozen=True, eq=False)
class PhasePolynomial:
    """
    Low-frequency aperture phase error as monomial coefficients c_2..c_10.

    Coefficients are in radians per power of the normalized aperture
    coordinate u in [-1, 1].
    """

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        if coeffs.shape != (NUM_COEFFS,):
            raise ShapeMismatchError(f"PhasePolynomial needs {NUM_COEFFS} coefficients, got {coeffs.size}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls) -> "PhasePolynomial":
        return cls(np.zeros(NUM_COEFFS))

    def coefficient(self, degree: int) -> float:
        """Return c_d for a degree in 2..10."""
        if degree not in DEGREES:
            raise ValueError(f"Degree {degree} outside {MIN_DEGREE}..{MAX_DEGREE}")
        return float(self.coeffs[degree - MIN_DEGREE])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    def __neg__(self) -> "PhasePolynomial":
        return PhasePolynomial(-self.coeffs)


# -- Validation ----------------------------------------------------------------


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def validate_slc(g: np.ndarray, *, min_size: int = 8) -> np.ndarray:
    """
    Check SLC invariants and return the image as complex128.

    Raises SlcSizeError for non-square, too small or non-power-of-two images and
    NonFiniteError for NaN/Inf samples.
    """
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise SlcSizeError(f"SLC must be a square 2-D array, got shape {g.shape}")
    size = g.shape[0]
    if size < min_size or not _is_power_of_two(size):
        raise SlcSizeError(f"SLC size must be a power of two >= {min_size}, got {size}")
    g = g.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("SLC contains non-finite samples")
    return g


# -- Along-track transforms ----------------------------------------------------


def fft_along_track(g: np.ndarray) -> np.ndarray:
    """Unitary 1-D FFT of every range column along the along-track axis (axis 0)."""
    g = validate_slc(g)
    return scipy.fft.fft(g, axis=0, norm="ortho")


def ifft_along_track(spectrum: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`fft_along_track`."""
    spectrum = validate_slc(spectrum)
    return scipy.fft.ifft(spectrum, axis=0, norm="ortho")


# -- Phase model ---------------------------------------------------------------


def aperture_coordinates(size: int) -> np.ndarray:
    """Normalized aperture coordinate u_n = 2n/(M-1) - 1."""
    if size < 2:
        raise ValueError(f"Aperture needs at least 2 samples, got {size}")
    return 2.0 * np.arange(size, dtype=np.float64) / (size - 1) - 1.0


def phase_basis(size: int) -> np.ndarray:
    """
    Monomial design matrix V with V[n, d-2] = u_n**d, shape (M, 9).

    ``V @ coeffs`` evaluates a phase polynomial and ``V.T @ dphi`` maps a phase
    gradient back to coefficient space.
    """
    u = aperture_coordinates(size)
    return np.vander(u, MAX_DEGREE + 1, increasing=True)[:, MIN_DEGREE:]


def eval_phase(p: PhasePolynomial, size: int) -> np.ndarray:
    """Evaluate the phase polynomial on the M-point aperture grid (radians)."""
    return phase_basis(size) @ p.coeffs


def apply_phase(spectrum: np.ndarray, phi: np.ndarray, sign: int) -> np.ndarray:
    """
    Multiply each along-track bin n of every range column by exp(i*sign*phi[n]).

    sign=+1 corrupts, sign=-1 corrects.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if phi.shape[0] != spectrum.shape[0]:
        raise ShapeMismatchError(f"Phase vector length {phi.shape[0]} does not match {spectrum.shape[0]} rows")
    return np.exp(1j * sign * phi)[:, np.newaxis] * spectrum


def correct(g_e: np.ndarray, p: PhasePolynomial) -> np.ndarray:
    """Remove the phase error ``p`` from a defocused image; a zero polynomial returns an exact copy."""
    g_e = validate_slc(g_e)
    if not np.any(p.coeffs):
        return g_e.copy()
    spectrum = fft_along_track(g_e)
    return ifft_along_track(apply_phase(spectrum, eval_phase(p, g_e.shape[0]), -1))


# -- Display transforms --------------------------------------------------------


def drc(g: np.ndarray) -> np.ndarray:
    """
    Rational tone mapping of |g| into [0, 1], anchored so the median maps to 0.2.

    Magnitudes are first normalized by their maximum.
    """
    magnitude = np.abs(np.asarray(g))
    peak = magnitude.max() if magnitude.size else 0.0
    if peak <= 0.0:
        raise DegenerateStatisticsError("DRC is undefined for an all-zero image")
    magnitude = magnitude / peak
    median = float(np.median(magnitude))
    if median <= 0.0 or median >= 1.0:
        raise DegenerateStatisticsError(f"DRC needs 0 < median < 1 after normalization, got {median}")

    target = DRC_MEDIAN_TARGET
    q = (target - target * median) / (median - target * median)
    out = q * magnitude / ((q - 1.0) * magnitude + 1.0)
    return np.clip(out, 0.0, 1.0)


def phase_map(g: np.ndarray) -> np.ndarray:
    """Element-wise arg(g)/pi in [-1, 1), with arg(0) = 0 and -pi kept on the branch cut."""
    g = np.asarray(g, dtype=np.complex128)
    angle = np.angle(g)
    # np.angle returns +pi on the negative real axis; fold it to -pi.
    angle = np.where(angle >= np.pi, -np.pi, angle)
    angle = np.where(g == 0, 0.0, angle)
    return angle / np.pi


# -- File I/O ------------------------------------------------------------------


def write_slc(g: np.ndarray, path: PathLike) -> Path:
    """Write an image in the little-endian SLC1 format (float32 re/im pairs)."""
    g = np.asarray(g)
    if g.ndim != 2:
        raise SlcSizeError(f"SLC must be 2-D, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("Refusing to write non-finite SLC samples")
    rows, cols = g.shape
    payload = np.empty((rows, cols, 2), dtype="<f4")
    payload[..., 0] = g.real
    payload[..., 1] = g.imag

    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("wb") as fh:
        fh.write(_SLC_HEADER.pack(SLC_MAGIC, rows, cols))
        fh.write(payload.tobytes())
    return out_path


def read_slc(path: PathLike) -> np.ndarray:
    """Read an SLC1 file into a complex128 array."""
    raw = Path(path).read_bytes()
    if len(raw) < _SLC_HEADER.size:
        raise SlcTruncatedError(f"{path}: file shorter than the SLC1 header")
    magic, rows, cols = _SLC_HEADER.unpack_from(raw)
    if magic != SLC_MAGIC:
        raise SlcFormatError(f"{path}: bad magic {magic!r}, expected {SLC_MAGIC!r}")

    expected = rows * cols * 2 * 4
    body = raw[_SLC_HEADER.size :]
    if len(body) < expected:
        raise SlcTruncatedError(f"{path}: header promises {rows}x{cols} but payload has {len(body)} of {expected} bytes")
    if len(body) > expected:
        raise SlcFormatError(f"{path}: {len(body) - expected} trailing bytes after payload")

    pairs = np.frombuffer(body, dtype="<f4").reshape(rows, cols, 2)
    if not np.all(np.isfinite(pairs)):
        raise NonFiniteError(f"{path}: payload contains non-finite values")
    return pairs[..., 0].astype(np.float64) + 1j * pairs[..., 1].astype(np.float64)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] display image as round(255*v)."""
    return np.round(255.0 * np.clip(img, 0.0, 1.0)).astype(np.uint8)


def export_drc(img: np.ndarray, path: PathLike) -> Path:
    """
    Save a display image as 8-bit grayscale.

    ``.pgm`` writes binary P5; anything else goes through Pillow (PNG by default).
    """
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    pixels = to_uint8(img)
    if out_path.suffix.lower() == ".pgm":
        rows, cols = pixels.shape
        with out_path.open("wb") as fh:
            fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
    else:
        Image.fromarray(pixels).save(out_path)
    return out_path
