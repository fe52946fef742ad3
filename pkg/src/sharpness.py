"""
Image sharpness metrics and their analytic gradients through k-space correction.

The four metrics depend only on pixel magnitude. ``mns``/``me``/``osf``/``ssi``
evaluate the printed formulas on an SLC; ``sharpness`` is the unified
"larger is sharper" score the optimizers maximize. Under a unitary transform
the total energy is fixed, so sum |g|^2 ln |g|^2 already grows as energy
concentrates (it is the negative entropy up to a constant) and is kept as is,
while the concave OSF sum grows as energy spreads and is negated.

Gradients follow the chain

    c -> phi = V c -> H = exp(-i phi) * G_e -> g_hat = ifft(H) -> a = |g_hat|
      -> J = -M(w * a)

using the real-gradient convention dJ/dRe(z) + i dJ/dIm(z) for complex
intermediates. The unitary inverse FFT has the forward FFT as its adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.fft

from src.errors import ShapeMismatchError, UndefinedMetricError
from src.slc import PhasePolynomial, apply_phase, eval_phase, phase_basis
from src.weighting import WeightFn, weight_identity

DEFAULT_OSF_B = 1e-6


class Metric(str, Enum):
    MNS = "mns"
    ME = "me"
    OSF = "osf"
    SSI = "ssi"


@dataclass(frozen=True)
class MetricKind:
    """A sharpness metric plus its parameters (only OSF has one)."""

    metric: Metric
    b: float = DEFAULT_OSF_B

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric", Metric(self.metric))
        if self.b <= 0:
            raise ValueError(f"OSF stabilizer b must be positive, got {self.b}")

    @property
    def name(self) -> str:
        return self.metric.value

    @classmethod
    def parse(cls, name: str, *, b: float = DEFAULT_OSF_B) -> "MetricKind":
        try:
            return cls(Metric(name.lower()), b=b)
        except ValueError as exc:
            choices = ", ".join(m.value for m in Metric)
            raise ValueError(f"Unknown metric {name!r}; expected one of {choices}") from exc


@dataclass(frozen=True)
class MetricGradient:
    """Gradient of the negated weighted objective with respect to c_2..c_10."""

    d_coeffs: np.ndarray
    objective: float


# -- Metrics on magnitude images -------------------------------------------------


def _mns_value(a: np.ndarray) -> float:
    mean = a.mean()
    if mean <= 0:
        raise UndefinedMetricError("MNS is undefined when mean magnitude is zero")
    return float(a.std() / mean)


def _me_value(a: np.ndarray) -> float:
    power = a * a
    positive = power > 0
    return float(np.sum(power[positive] * np.log(power[positive])))


def _osf_value(a: np.ndarray, b: float) -> float:
    if b <= 0:
        raise ValueError(f"OSF stabilizer b must be positive, got {b}")
    return float(np.sum(np.log(a * a + b)))


def _ssi_value(a: np.ndarray) -> float:
    power = a * a
    return float(np.sum(power * power))


def mns(g: np.ndarray) -> float:
    """Mean-normalized standard deviation stddev(|g|)/mean(|g|) (population stddev)."""
    return _mns_value(np.abs(g))


def me(g: np.ndarray) -> float:
    """Entropy-style sum of |g|^2 ln |g|^2, with 0 ln 0 := 0."""
    return _me_value(np.abs(g))


def osf(g: np.ndarray, b: float = DEFAULT_OSF_B) -> float:
    """Sum of ln(|g|^2 + b)."""
    return _osf_value(np.abs(g), b)


def ssi(g: np.ndarray) -> float:
    """Sum of squared intensity, |g|^4."""
    return _ssi_value(np.abs(g))


def sharpness(kind: MetricKind, magnitude: np.ndarray) -> float:
    """Unified score to maximize; OSF is negated, the other three are used as printed."""
    a = np.asarray(magnitude, dtype=np.float64)
    if kind.metric is Metric.MNS:
        return _mns_value(a)
    if kind.metric is Metric.ME:
        return _me_value(a)
    if kind.metric is Metric.OSF:
        return -_osf_value(a, kind.b)
    return _ssi_value(a)


def sharpness_magnitude_grad(kind: MetricKind, a: np.ndarray) -> np.ndarray:
    """d sharpness / d a for every pixel of the magnitude image ``a``."""
    if kind.metric is Metric.MNS:
        n = a.size
        mean = a.mean()
        if mean <= 0:
            raise UndefinedMetricError("MNS is undefined when mean magnitude is zero")
        std = a.std()
        # At std == 0 the stddev term has no derivative; take the zero subgradient.
        d_std = (a - mean) / (n * std) if std > 0 else np.zeros_like(a)
        return d_std / mean - std / (n * mean * mean)
    if kind.metric is Metric.ME:
        power = a * a
        grad = np.zeros_like(a)
        positive = power > 0
        grad[positive] = 2.0 * a[positive] * (np.log(power[positive]) + 1.0)
        return grad
    if kind.metric is Metric.OSF:
        return -2.0 * a / (a * a + kind.b)
    return 4.0 * a**3


# -- Gradients through the correction pipeline ----------------------------------


def phase_gradient(
    kind: MetricKind,
    spectrum: np.ndarray,
    phi: np.ndarray,
    weight_map: Optional[np.ndarray] = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Objective J = -sharpness(w * |ifft(exp(-i phi) G_e)|) and dJ/dphi.

    Returns ``(J, dJ/dphi, g_hat)`` so callers that also need the corrected
    image do not pay for a second inverse transform.
    """
    corrected_spectrum = apply_phase(spectrum, phi, -1)
    g_hat = scipy.fft.ifft(corrected_spectrum, axis=0, norm="ortho")
    a = np.abs(g_hat)
    if weight_map is None:
        weight_map = np.ones_like(a)
    elif weight_map.shape != a.shape:
        raise ShapeMismatchError(f"Weight map shape {weight_map.shape} does not match image {a.shape}")

    weighted = weight_map * a
    objective = -sharpness(kind, weighted)
    d_a = -weight_map * sharpness_magnitude_grad(kind, weighted)

    # Magnitude -> complex pixel: dJ/dz = dJ/da * z/|z| (zero where |z| = 0).
    unit = np.zeros_like(g_hat)
    nonzero = a > 0
    unit[nonzero] = g_hat[nonzero] / a[nonzero]
    d_g_hat = d_a * unit

    d_corrected = scipy.fft.fft(d_g_hat, axis=0, norm="ortho")
    # dH/dphi_n = -i H[n, r]  ->  dJ/dphi_n = sum_r Im(conj(dJ/dH) * H).
    d_phi = np.sum(np.imag(np.conj(d_corrected) * corrected_spectrum), axis=1)
    return objective, d_phi, g_hat


def sharpness_grad(
    kind: MetricKind,
    spectrum: np.ndarray,
    p: PhasePolynomial,
    weight: Optional[WeightFn] = None,
    *,
    weight_map: Optional[np.ndarray] = None,
) -> MetricGradient:
    """
    Gradient of the negated weighted sharpness objective with respect to c_2..c_10.

    The weight is evaluated on |g_e| = |ifft(G_e)|; pass ``weight_map`` to reuse
    a precomputed map.
    """
    size = spectrum.shape[0]
    if weight_map is None:
        weight = weight or weight_identity()
        g_e = scipy.fft.ifft(spectrum, axis=0, norm="ortho")
        weight_map = weight(np.abs(g_e))
    objective, d_phi, _ = phase_gradient(kind, spectrum, eval_phase(p, size), weight_map)
    return MetricGradient(d_coeffs=phase_basis(size).T @ d_phi, objective=objective)
