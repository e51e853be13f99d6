"""
Boundary-aware propagation module: two first-stage scans, four
second-stage scans and a pointwise fusion of the four results.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from tensor_core.exceptions import MissingStateError, ShapeMismatchError
from tensor_core.ops import pointwise_linear, pointwise_linear_vjp

from .params import BfpParams, FUSION_ORDER, ScanDirection, ScanParams, StepCount
from .scans import ScanResult, scan_backward, uag_scan, uag_scan_second, validate_gate

logger = logging.getLogger(__name__)


def fuse_four(outputs: List[np.ndarray], projection):
    """
    Concatenate S.E, S.W, N.E, N.W along channels and project
    ``4C -> C_out`` per pixel.
    """
    if len(outputs) != 4:
        raise ShapeMismatchError('fuse_four inputs', (4,), (len(outputs),))
    shape = outputs[0].shape
    for item in outputs[1:]:
        if item.shape != shape:
            raise ShapeMismatchError('fuse_four inputs', shape, item.shape)
    if projection.ndim != 2 or projection.shape[1] != 4 * shape[0]:
        raise ShapeMismatchError('fuse_four projection', ('C_out', 4 * shape[0]), projection.shape)
    stacked = np.concatenate(outputs, axis=0)
    return pointwise_linear(stacked, projection), stacked


def fuse_four_vjp(upstream, stacked, projection):
    """Returns (per-direction input gradients, projection gradient)."""
    grad_stacked, grad_projection, _ = pointwise_linear_vjp(upstream, stacked, projection)
    return np.split(grad_stacked, 4, axis=0), grad_projection


@dataclass
class BfpState:
    """Forward intermediates of ``bfp_forward`` kept for the backward pass."""
    scans: Dict[ScanDirection, ScanResult]
    stacked: np.ndarray
    params: BfpParams
    gate: Optional[np.ndarray]
    gate_first_stage: bool


@dataclass
class BfpResult:
    output: np.ndarray
    steps: StepCount
    state: BfpState


@dataclass
class BfpGradients:
    features: np.ndarray
    params: BfpParams
    gate: Optional[np.ndarray]


def bfp_forward(features, gate, params: BfpParams, gate_first_stage=True, threads=None):
    """
    Run S and N over ``features``, then S.E/S.W over the S output and
    N.E/N.W over the N output, and fuse the four.

    ``gate`` is the propagation confidence (``None`` runs every scan
    ungated). With ``gate_first_stage=False`` only the second stage is
    gated.
    """
    if features.ndim != 3:
        raise ShapeMismatchError('bfp_forward features', ('C', 'H', 'W'), features.shape)
    _, height, width = features.shape
    gate = validate_gate(gate, height, width)
    first_gate = gate if gate_first_stage else None
    scans = {}
    for direction in (ScanDirection.SOUTH, ScanDirection.NORTH):
        scans[direction] = uag_scan(
            features, params.scans[direction], direction, first_gate, threads
        )
    for direction in FUSION_ORDER:
        parent = scans[direction.parent].output
        scans[direction] = uag_scan_second(
            parent, params.scans[direction], direction, gate, threads
        )
    output, stacked = fuse_four([scans[d].output for d in FUSION_ORDER], params.projection)
    # S and N run side by side, as do the four second-stage scans
    steps = StepCount(sequential_steps=2 * height + 4 * width, parallel_width=max(height, width))
    state = BfpState(scans=scans, stacked=stacked, params=params, gate=gate,
                     gate_first_stage=gate_first_stage)
    return BfpResult(output=output, steps=steps, state=state)


def bfp_backward(upstream, state: Optional[BfpState]):
    """Gradients of ``bfp_forward`` for its features, every weight and the gate."""
    if state is None:
        raise MissingStateError('bfp_backward needs the BfpState returned by bfp_forward')
    if upstream.shape[1:] != state.stacked.shape[1:] or \
            upstream.shape[0] != state.params.projection.shape[0]:
        raise ShapeMismatchError(
            'bfp_backward upstream',
            (state.params.projection.shape[0],) + state.stacked.shape[1:],
            upstream.shape,
        )
    direction_grads, grad_projection = fuse_four_vjp(upstream, state.stacked, state.params.projection)
    grad_gate = np.zeros_like(state.gate) if state.gate is not None else None
    param_grads: Dict[ScanDirection, ScanParams] = {}
    parent_grads = {}
    for direction, grad in zip(FUSION_ORDER, direction_grads):
        grads = scan_backward(np.ascontiguousarray(grad), state.scans[direction])
        param_grads[direction] = grads.params
        if direction.parent in parent_grads:
            parent_grads[direction.parent] += grads.input
        else:
            parent_grads[direction.parent] = grads.input
        if grads.gate is not None:
            grad_gate += grads.gate
    grad_features = None
    for direction in (ScanDirection.SOUTH, ScanDirection.NORTH):
        grads = scan_backward(parent_grads[direction], state.scans[direction])
        param_grads[direction] = grads.params
        grad_features = grads.input if grad_features is None else grad_features + grads.input
        if grads.gate is not None:
            grad_gate += grads.gate
    return BfpGradients(
        features=grad_features,
        params=BfpParams(scans=param_grads, projection=grad_projection),
        gate=grad_gate,
    )
