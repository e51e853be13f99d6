"""
Boundary confidence and the propagation confidence that gates scans.

``b`` is the softmax probability of the boundary class (the last of
N + 1 channels). ``p = 1 - beta * sigmoid(alpha * b - gamma)`` turns it
into a gate: high boundary confidence closes propagation.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from boundary_labels.pgm import write_label_pgm
from tensor_core.exceptions import ConfidenceRangeError, ShapeMismatchError
from tensor_core.ops import sigmoid, softmax_channels, softmax_channels_vjp

logger = logging.getLogger(__name__)


@dataclass
class GateParams:
    """
    ``alpha`` and ``gamma`` are fixed constants; ``beta`` is learned and
    kept in [0, 1] by ``clamp_beta``.
    """
    alpha: float = 20.0
    gamma: float = 4.0
    beta: float = 1.0

    @classmethod
    def from_settings(cls):
        return cls(
            alpha=getattr(settings, 'BFP_GATE_ALPHA', 20.0),
            gamma=getattr(settings, 'BFP_GATE_GAMMA', 4.0),
            beta=getattr(settings, 'BFP_GATE_BETA', 1.0),
        )


def clamp_beta(gate_params: GateParams) -> GateParams:
    clamped = min(max(float(gate_params.beta), 0.0), 1.0)
    if clamped != gate_params.beta:
        logger.debug(f"beta clamped from {gate_params.beta} to {clamped}")
    gate_params.beta = clamped
    return gate_params


def _validate_scores(scores):
    if scores.ndim != 3 or scores.shape[0] < 2:
        raise ShapeMismatchError('boundary_confidence scores', ('N+1>=2', 'H', 'W'), scores.shape)


def boundary_confidence(scores):
    """Softmax probability of the last (boundary) channel, ``H x W``."""
    _validate_scores(scores)
    return softmax_channels(scores)[-1]


def boundary_confidence_vjp(upstream, scores, probs=None):
    """Gradient of ``boundary_confidence`` with respect to the scores."""
    _validate_scores(scores)
    if upstream.shape != scores.shape[1:]:
        raise ShapeMismatchError('boundary_confidence_vjp upstream', scores.shape[1:], upstream.shape)
    probs = softmax_channels(scores) if probs is None else probs
    selector = np.zeros_like(probs)
    selector[-1] = upstream
    return softmax_channels_vjp(selector, probs)


def validate_confidence(values, name='confidence'):
    values = np.asarray(values)
    if values.size and (not np.isfinite(values).all() or values.min() < 0 or values.max() > 1):
        raise ConfidenceRangeError(
            f"{name} must lie in [0, 1], found [{values.min()}, {values.max()}]"
        )
    return values


def propagation_confidence(b, gate_params: GateParams):
    """``1 - beta * sigmoid(alpha * b - gamma)``, clipped into [0, 1]."""
    b = validate_confidence(b, 'boundary confidence')
    gate = sigmoid(gate_params.alpha * b - gate_params.gamma)
    return np.clip(1.0 - gate_params.beta * gate, 0.0, 1.0)


def propagation_confidence_vjp(upstream, b, gate_params: GateParams, stop_gradient=False):
    """
    Returns ``(grad_b, grad_beta)``.

    With ``stop_gradient`` the gate still trains beta but sends nothing
    back into the boundary scores.
    """
    b = validate_confidence(b, 'boundary confidence')
    if upstream.shape != b.shape:
        raise ShapeMismatchError('propagation_confidence_vjp upstream', b.shape, upstream.shape)
    gate = sigmoid(gate_params.alpha * b - gate_params.gamma)
    grad_beta = float(-(upstream * gate).sum())
    if stop_gradient:
        return np.zeros_like(b, dtype=np.result_type(b, upstream)), grad_beta
    grad_b = -gate_params.beta * gate_params.alpha * gate * (1.0 - gate) * upstream
    return grad_b, grad_beta


def confidence_to_pgm(values, path):
    """Write a confidence map as an 8-bit PGM with ``round(255 * v)``."""
    values = validate_confidence(values)
    levels = np.floor(255.0 * values + 0.5).astype(np.int64)
    write_label_pgm(path, levels)
    logger.info(f"Wrote confidence map {values.shape} to {path}")
    return levels
