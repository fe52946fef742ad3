"""
End-to-end learned autofocus: regressor -> phase polynomial -> k-space correction
-> relative sharpness loss, with exact reverse-mode gradients.

The DRC image and phase map are data, not parameters; no gradient flows into
the input SLC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.learned_autofocus.regressor import RegressorParams, backward, forward, stack_inputs
from src.errors import UndefinedMetricError
from src.gd_autofocus import FocusResult
from src.sharpness import Metric, MetricKind, phase_gradient, sharpness
from src.slc import PhasePolynomial, correct, drc, fft_along_track, phase_basis, phase_map, validate_slc

LOSS_METRIC = MetricKind(Metric.MNS)
LOSS_MODES = ("relative", "absolute")


@dataclass(frozen=True, eq=False)
class PipelineOutput:
    g_hat: np.ndarray
    phi_hat: PhasePolynomial
    loss: float


def network_input(g_e: np.ndarray, *, zero_phase_input: bool = False) -> np.ndarray:
    """(DRC, phase/pi) channels; the phase channel is zeroed for the phase-blind ablation."""
    phase = np.zeros(g_e.shape) if zero_phase_input else phase_map(g_e)
    return stack_inputs(drc(g_e), phase)


def _loss_from_sharpness(after: float, before: float, loss_mode: str) -> float:
    if loss_mode == "relative":
        return -(after - before) / before
    return -after


def _check_mode(loss_mode: str) -> None:
    if loss_mode not in LOSS_MODES:
        raise ValueError(f"Unknown loss mode {loss_mode!r}; expected one of {LOSS_MODES}")


def _input_sharpness(g_e: np.ndarray) -> float:
    before = sharpness(LOSS_METRIC, np.abs(g_e))
    if before == 0:
        raise UndefinedMetricError("Relative sharpness loss is undefined when the input MNS is zero")
    return before


def pipeline_forward(
    g_e: np.ndarray,
    params: RegressorParams,
    *,
    loss_mode: str = "relative",
    zero_phase_input: bool = False,
) -> PipelineOutput:
    """
    Correct ``g_e`` with the regressor's coefficients and score the result.

    The relative loss is -(MNS(|g_hat|) - MNS(|g_e|)) / MNS(|g_e|); the absolute
    variant is -MNS(|g_hat|).
    """
    _check_mode(loss_mode)
    g_e = validate_slc(g_e)
    before = _input_sharpness(g_e)
    coeffs, _ = forward(network_input(g_e, zero_phase_input=zero_phase_input), params)
    phi_hat = PhasePolynomial(coeffs)
    g_hat = correct(g_e, phi_hat)
    after = sharpness(LOSS_METRIC, np.abs(g_hat))
    return PipelineOutput(g_hat=g_hat, phi_hat=phi_hat, loss=_loss_from_sharpness(after, before, loss_mode))


def pipeline_backward(
    g_e: np.ndarray,
    params: RegressorParams,
    *,
    loss_mode: str = "relative",
    zero_phase_input: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and its gradient with respect to every regressor parameter."""
    _check_mode(loss_mode)
    g_e = validate_slc(g_e)
    before = _input_sharpness(g_e)
    coeffs, cache = forward(network_input(g_e, zero_phase_input=zero_phase_input), params)

    basis = phase_basis(g_e.shape[0])
    # phase_gradient returns J = -MNS(|g_hat|) and dJ/dphi.
    neg_after, d_phi, _ = phase_gradient(LOSS_METRIC, fft_along_track(g_e), basis @ coeffs)
    loss = _loss_from_sharpness(-neg_after, before, loss_mode)
    if loss_mode == "relative":
        d_phi = d_phi / before
    d_coeffs = basis.T @ d_phi
    return loss, backward(d_coeffs, params, cache)


def infer(g_e: np.ndarray, params: RegressorParams, *, zero_phase_input: bool = False) -> FocusResult:
    """Single forward pass; returns the complex corrected SLC."""
    out = pipeline_forward(g_e, params, zero_phase_input=zero_phase_input)
    return FocusResult(g_hat=out.g_hat, phi_hat=out.phi_hat, trace=(out.loss,))
