"""
Synthetic SAS scenes and the polynomial phase-error sampler.

Every draw goes through :func:`make_rng`, a PCG64 generator keyed by a
``SeedSequence`` of (seed, stream). Streams keep scene pixels, scene
parameters and corruption draws independent for the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.settings import SceneSettings
from src.slc import (
    MAX_DEGREE,
    MIN_DEGREE,
    NUM_COEFFS,
    PhasePolynomial,
    apply_phase,
    eval_phase,
    fft_along_track,
    ifft_along_track,
    phase_basis,
)

MAX_PHASE_SCALE_RAD = 18.0
SHADOW_FLOOR = 0.1
TEXTURE_KINDS = ("flat", "ripple", "shadow")

_STREAM_SCENE = 1
_STREAM_SCENE_PARAMS = 2
_STREAM_CORRUPTION = 3


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional stream path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def derive_seed(base_seed: int, index: int) -> int:
    """Independent 64-bit seed for item ``index`` of a run seeded with ``base_seed``."""
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class Texture:
    """Seafloor amplitude profile multiplied onto the speckle field."""

    kind: str = "flat"
    wavelength_px: float = 16.0
    depth: float = 0.0
    orientation_rad: float = 0.0
    fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"Unknown texture {self.kind!r}; expected one of {TEXTURE_KINDS}")
        if self.kind == "ripple":
            if not 0.0 <= self.depth <= 1.0:
                raise ValueError(f"Ripple depth must lie in [0, 1], got {self.depth}")
            if self.wavelength_px <= 0:
                raise ValueError(f"Ripple wavelength must be positive, got {self.wavelength_px}")
        if self.kind == "shadow" and not 0.0 < self.fraction < 1.0:
            raise ValueError(f"Shadow fraction must lie in (0, 1), got {self.fraction}")

    def profile(self, size: int) -> np.ndarray:
        rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        if self.kind == "ripple":
            along = cols * np.cos(self.orientation_rad) + rows * np.sin(self.orientation_rad)
            return 1.0 + self.depth * np.sin(2.0 * np.pi * along / self.wavelength_px)
        if self.kind == "shadow":
            # Sonar looks from the left, so shadows fall at far range (right edge).
            start = int(round((1.0 - self.fraction) * size))
            profile = np.ones((size, size))
            profile[:, start:] = SHADOW_FLOOR
            return profile
        return np.ones((size, size))


def flat() -> Texture:
    return Texture("flat")


def ripple(wavelength_px: float, depth: float, orientation_rad: float) -> Texture:
    return Texture("ripple", wavelength_px=wavelength_px, depth=depth, orientation_rad=orientation_rad)


def shadow(fraction: float) -> Texture:
    return Texture("shadow", fraction=fraction)


@dataclass(frozen=True)
class SceneSpec:
    size: int
    seed: int
    scatterer_count: int = 0
    scatterer_snr_db: float = 30.0
    texture: Texture = field(default_factory=flat)

    def __post_init__(self) -> None:
        if self.size < 2 or self.size & (self.size - 1):
            raise ValueError(f"Scene size must be a power of two, got {self.size}")
        if self.scatterer_count < 0:
            raise ValueError(f"scatterer_count must be >= 0, got {self.scatterer_count}")


@dataclass(frozen=True)
class CorruptionSpec:
    """A sampled phase error: the raw draw plus the normalized, scaled result."""

    order: int
    raw_coeffs: tuple[float, ...]
    scale: float
    realized: PhasePolynomial


def gen_scene(spec: SceneSpec) -> np.ndarray:
    """
    Fully developed speckle (unit mean intensity) shaped by the texture, plus
    isolated point scatterers ``scatterer_snr_db`` above the mean background
    amplitude. Deterministic in ``spec.seed``.
    """
    rng = make_rng(spec.seed, _STREAM_SCENE)
    size = spec.size
    speckle = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) / np.sqrt(2.0)
    scene = speckle * spec.texture.profile(size)

    if spec.scatterer_count:
        amplitude = np.abs(scene).mean() * 10.0 ** (spec.scatterer_snr_db / 20.0)
        rows = rng.integers(0, size, spec.scatterer_count)
        cols = rng.integers(0, size, spec.scatterer_count)
        phases = rng.uniform(0.0, 2.0 * np.pi, spec.scatterer_count)
        np.add.at(scene, (rows, cols), amplitude * np.exp(1j * phases))
    return scene


def sample_scene_spec(size: int, seed: int, settings: Optional[SceneSettings] = None) -> SceneSpec:
    """Draw texture and scatterer parameters for one dataset image."""
    settings = settings or SceneSettings()
    rng = make_rng(seed, _STREAM_SCENE_PARAMS)
    kind = TEXTURE_KINDS[int(rng.integers(0, len(TEXTURE_KINDS)))]
    if kind == "ripple":
        texture = ripple(
            wavelength_px=float(rng.uniform(*settings.ripple_wavelength_px)),
            depth=float(rng.uniform(*settings.ripple_depth)),
            orientation_rad=float(rng.uniform(0.0, np.pi)),
        )
    elif kind == "shadow":
        texture = shadow(float(rng.uniform(*settings.shadow_fraction)))
    else:
        texture = flat()
    return SceneSpec(
        size=size,
        seed=seed,
        scatterer_count=int(rng.integers(0, settings.max_scatterers + 1)),
        scatterer_snr_db=float(rng.uniform(*settings.scatterer_snr_db)),
        texture=texture,
    )


def sample_corruption(size: int, seed: int) -> CorruptionSpec:
    """
    Random low-frequency phase error.

    Order ~ U{2..10}; coefficients for degrees 2..order ~ U[-1, 1]; the
    polynomial is normalized to unit peak magnitude on the M-point grid and
    scaled by U[-18, 18] radians.
    """
    if size < 2:
        raise ValueError(f"Aperture needs at least 2 samples, got {size}")
    rng = make_rng(seed, _STREAM_CORRUPTION)
    order = int(rng.integers(MIN_DEGREE, MAX_DEGREE + 1))
    n_active = order - MIN_DEGREE + 1
    basis = phase_basis(size)[:, :n_active]

    while True:
        raw = rng.uniform(-1.0, 1.0, n_active)
        peak = np.max(np.abs(basis @ raw))
        if peak > 0:
            break
    scale = float(rng.uniform(-MAX_PHASE_SCALE_RAD, MAX_PHASE_SCALE_RAD))

    realized = np.zeros(NUM_COEFFS)
    realized[:n_active] = raw / peak * scale
    return CorruptionSpec(
        order=order,
        raw_coeffs=tuple(float(c) for c in raw),
        scale=scale,
        realized=PhasePolynomial(realized),
    )


def corrupt(g: np.ndarray, p: PhasePolynomial) -> np.ndarray:
    """Defocus ``g`` by applying the phase error ``p`` in k-space."""
    spectrum = fft_along_track(g)
    return ifft_along_track(apply_phase(spectrum, eval_phase(p, spectrum.shape[0]), 1))
