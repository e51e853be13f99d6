"""
Row-parallel (UAG) scans and their exact backward pass.

Every direction is reduced to one canonical propagation: the scan runs
down axis 1 of a ``C x T x L`` tensor and each step updates all ``L``
positions of a line at once, convolving along the last axis. First
stage scans map S/N onto it by flipping rows; second stage scans
transpose to ``C x W x H`` so columns become the scanned lines, then
flip for the west and north variants.

Recurrence at step ``t`` (``m = h * p``, the gated hidden state)::

    a[t] = U * i[t] + delta + W * m[t-1] + W_hat * shift(m[t-1])
    h[t] = relu(a[t])

``shift`` moves position ``j - 1`` onto ``j``, which is the north-west
(diagonal) predecessor in canonical orientation. Without a gate the
hidden state is used as is, so an all-ones gate reproduces the ungated
scan bit for bit.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.conf import settings

from tensor_core.exceptions import ConfidenceRangeError, ShapeMismatchError
from tensor_core.ops import (
    correlate_last,
    correlate_last_vjp_input,
    correlate_last_vjp_kernel,
    correlate_window,
    pad_last,
    relu,
)

from .params import ScanDirection, ScanParams, StepCount

logger = logging.getLogger(__name__)


def resolve_threads(threads=None):
    threads = threads if threads is not None else getattr(settings, 'BFP_THREADS', 1)
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    return int(threads)


def shift_down(x):
    """Move position ``j - 1`` of the last axis onto ``j``; position 0 becomes zero."""
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


def shift_up(x):
    """Adjoint of ``shift_down``."""
    out = np.zeros_like(x)
    out[..., :-1] = x[..., 1:]
    return out


def position_chunks(length, threads):
    """Split ``range(length)`` into at most ``threads`` contiguous slices."""
    bounds = np.linspace(0, length, min(threads, length) + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def to_canonical(x, flip_rows, flip_cols, transpose):
    """Orient the two trailing (spatial) axes of ``x`` for the canonical scan."""
    if flip_rows:
        x = np.flip(x, axis=-2)
    if flip_cols:
        x = np.flip(x, axis=-1)
    if transpose:
        x = np.swapaxes(x, -1, -2)
    return np.ascontiguousarray(x)


def from_canonical(x, flip_rows, flip_cols, transpose):
    if transpose:
        x = np.swapaxes(x, -1, -2)
    if flip_cols:
        x = np.flip(x, axis=-1)
    if flip_rows:
        x = np.flip(x, axis=-2)
    return np.ascontiguousarray(x)


@dataclass
class PropagationTrace:
    """Everything the backward pass replays, stored in canonical orientation."""
    inputs: np.ndarray
    pre_activation: np.ndarray
    hidden: np.ndarray
    gated: np.ndarray
    gate: Optional[np.ndarray]
    params: ScanParams


def propagate(x, params, gate=None, threads=1):
    """Canonical forward scan over axis 1. Returns (hidden, trace)."""
    _, steps, length = x.shape
    pad = (params.k - 1) // 2
    diagonal = params.diagonal_kernel is not None
    drive = correlate_last(x, params.input_kernel, params.bias)
    pre = np.empty_like(drive)
    hidden = np.empty_like(drive)
    gated = np.empty((drive.shape[0], max(steps - 1, 0), length), dtype=drive.dtype)
    pre[:, 0] = drive[:, 0]
    hidden[:, 0] = relu(pre[:, 0])
    chunks = position_chunks(length, threads)
    pool = ThreadPoolExecutor(max_workers=len(chunks)) if len(chunks) > 1 else None
    try:
        for t in range(1, steps):
            previous = hidden[:, t - 1] if gate is None else hidden[:, t - 1] * gate[t - 1]
            gated[:, t - 1] = previous
            padded = pad_last(previous, pad)
            padded_shift = pad_last(shift_down(previous), pad) if diagonal else None

            def update(bounds, t=t, padded=padded, padded_shift=padded_shift):
                lo, hi = bounds
                acc = drive[:, t, lo:hi] + correlate_window(padded, params.recurrent_kernel, lo, hi)
                if padded_shift is not None:
                    acc += correlate_window(padded_shift, params.diagonal_kernel, lo, hi)
                pre[:, t, lo:hi] = acc
                hidden[:, t, lo:hi] = relu(acc)

            if pool is None:
                update((0, length))
            else:
                list(pool.map(update, chunks))
    finally:
        if pool is not None:
            pool.shutdown()
    trace = PropagationTrace(
        inputs=x, pre_activation=pre, hidden=hidden, gated=gated, gate=gate, params=params,
    )
    return hidden, trace


@dataclass
class ScanGradients:
    input: np.ndarray
    params: ScanParams
    gate: Optional[np.ndarray]


def propagate_backward(upstream, trace):
    """
    Reverse-mode pass through ``propagate``.

    The carry from step ``t`` back to ``t - 1`` is the gradient on the
    gated state ``m[t-1]`` times the gate; the gate itself collects
    ``sum_c grad_m * h``.
    """
    params = trace.params
    pre, hidden, gate = trace.pre_activation, trace.hidden, trace.gate
    steps = pre.shape[1]
    diagonal = params.diagonal_kernel is not None
    grad_pre = np.empty_like(pre)
    grad_gate = np.zeros(pre.shape[1:], dtype=pre.dtype) if gate is not None else None
    carry = None
    for t in range(steps - 1, -1, -1):
        total = upstream[:, t] if carry is None else upstream[:, t] + carry
        grad_pre[:, t] = total * (pre[:, t] > 0)
        if t == 0:
            break
        grad_m = correlate_last_vjp_input(grad_pre[:, t], params.recurrent_kernel)
        if diagonal:
            grad_m += shift_up(correlate_last_vjp_input(grad_pre[:, t], params.diagonal_kernel))
        if gate is None:
            carry = grad_m
        else:
            carry = grad_m * gate[t - 1]
            grad_gate[t - 1] = (grad_m * hidden[:, t - 1]).sum(axis=0)
    k = params.k
    later = grad_pre[:, 1:]
    grads = ScanParams(
        input_kernel=correlate_last_vjp_kernel(grad_pre, trace.inputs, k),
        recurrent_kernel=correlate_last_vjp_kernel(later, trace.gated, k),
        bias=grad_pre.sum(axis=(1, 2)),
        diagonal_kernel=(
            correlate_last_vjp_kernel(later, shift_down(trace.gated), k) if diagonal else None
        ),
    )
    grad_input = correlate_last_vjp_input(grad_pre, params.input_kernel)
    return ScanGradients(input=grad_input, params=grads, gate=grad_gate)


@dataclass
class ScanResult:
    output: np.ndarray
    steps: StepCount
    direction: ScanDirection
    trace: PropagationTrace


def validate_gate(gate, height, width):
    if gate is None:
        return None
    gate = np.asarray(gate)
    if gate.shape != (height, width):
        raise ShapeMismatchError('propagation confidence', (height, width), gate.shape)
    if not np.isfinite(gate).all() or gate.min() < 0 or gate.max() > 1:
        raise ConfidenceRangeError(
            f"Propagation confidence must lie in [0, 1], found [{gate.min()}, {gate.max()}]"
        )
    return gate


def _validate_input(x, operation):
    if x.ndim != 3 or 0 in x.shape:
        raise ShapeMismatchError(operation, ('C', 'H>0', 'W>0'), x.shape)


def _scan(x, params, direction, gate, threads, transpose):
    _validate_input(x, f"scan {direction.value} input")
    _, height, width = x.shape
    params.validate(x.shape[0], second_stage=transpose)
    gate = validate_gate(gate, height, width)
    threads = resolve_threads(threads)
    flip_rows, flip_cols = direction.flips
    canonical = to_canonical(x, flip_rows, flip_cols, transpose)
    canonical_gate = None
    if gate is not None:
        canonical_gate = to_canonical(gate.astype(x.dtype, copy=False), flip_rows, flip_cols, transpose)
    hidden, trace = propagate(canonical, params, canonical_gate, threads)
    output = from_canonical(hidden, flip_rows, flip_cols, transpose)
    steps = StepCount(sequential_steps=width if transpose else height,
                      parallel_width=height if transpose else width)
    logger.debug(
        f"Scan {direction.value} over {height}x{width}: "
        f"{steps.sequential_steps} steps, {threads} thread(s), gated={gate is not None}"
    )
    return ScanResult(output=output, steps=steps, direction=direction, trace=trace)


def uag_scan(x, params, direction, gate=None, threads=None):
    """
    First stage scan (S or N): one step per row, each row updated in
    parallel from the gated previous row.

    ``gate`` is the ``H x W`` propagation confidence; ``None`` means an
    ungated scan.
    """
    direction = ScanDirection(direction)
    if not direction.is_first_stage:
        raise ValueError(f"uag_scan: expected S or N, got {direction.value}")
    return _scan(x, params, direction, gate, threads, transpose=False)


def uag_scan_second(x, params, direction, gate=None, threads=None):
    """
    Second stage scan (S.E, S.W, N.E or N.W) over the output of its
    first-stage parent: one step per column, with both the horizontal
    and the diagonal predecessor contributing.
    """
    direction = ScanDirection(direction)
    if not direction.is_second_stage:
        raise ValueError(f"uag_scan_second: expected S.E, S.W, N.E or N.W, got {direction.value}")
    return _scan(x, params, direction, gate, threads, transpose=True)


def scan_backward(upstream, result):
    """Gradients of a ``uag_scan``/``uag_scan_second`` result for input, weights and gate."""
    if upstream.shape != result.output.shape:
        raise ShapeMismatchError(
            f"scan {result.direction.value} upstream", result.output.shape, upstream.shape
        )
    flip_rows, flip_cols = result.direction.flips
    transpose = result.direction.is_second_stage
    canonical = to_canonical(upstream, flip_rows, flip_cols, transpose)
    grads = propagate_backward(canonical, result.trace)
    grads.input = from_canonical(grads.input, flip_rows, flip_cols, transpose)
    if grads.gate is not None:
        grads.gate = from_canonical(grads.gate, flip_rows, flip_cols, transpose)
    return grads
