"""
Dense-array operations with explicit vector-Jacobian products.

Every forward op has a matching ``*_vjp`` that takes the upstream
gradient plus whatever the forward needs to be replayed. Callers keep
their own tape: the op set is small and closed, so there is no graph.

Channel reductions all go through ``mix_channels``, which sums input
channels strictly from left to right. An output element therefore
sees the same sequence of floating point operations whether the
positions around it are computed in one call or split across workers.
"""

import logging

import numpy as np
from scipy import special

from .exceptions import LabelValueError, ShapeMismatchError

logger = logging.getLogger(__name__)

ROW = 'row'
COLUMN = 'column'
AXES = (ROW, COLUMN)


def _broadcast_channels(vector, ndim):
    """Reshape a per-channel vector so it broadcasts over ``ndim - 1`` trailing axes."""
    return vector.reshape((-1,) + (1,) * (ndim - 1))


def mix_channels(tap, x):
    """
    Per-position linear channel map: ``out[o, ...] = sum_i tap[o, i] * x[i, ...]``.

    The sum over ``i`` runs strictly left to right.
    """
    if tap.ndim != 2 or tap.shape[1] != x.shape[0]:
        raise ShapeMismatchError('mix_channels', (tap.shape[0], x.shape[0]), tap.shape)
    products = tap.reshape(tap.shape + (1,) * (x.ndim - 1)) * x[None]
    # accumulate is sequential along the axis: ((t0 + t1) + t2) + ...
    return np.ascontiguousarray(np.add.accumulate(products, axis=1)[:, -1])


def pad_last(x, pad):
    """Zero-pad the last axis by ``pad`` on both sides."""
    if pad == 0:
        return x
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    return np.pad(x, widths)


def correlate_window(padded, kernel, lo, hi):
    """
    Cross-correlate output positions ``lo:hi`` along the last axis.

    ``padded`` is the input already zero-padded by ``(k - 1) // 2``;
    taps are accumulated in order, channels inside each tap in order.
    """
    k = kernel.shape[2]
    out = mix_channels(kernel[:, :, 0], padded[..., lo:hi])
    for j in range(1, k):
        out += mix_channels(kernel[:, :, j], padded[..., lo + j:hi + j])
    return out


def correlate_last(x, kernel, bias=None):
    """Channel-mixing 1D cross-correlation along the last axis, zero padded."""
    pad = (kernel.shape[2] - 1) // 2
    out = correlate_window(pad_last(x, pad), kernel, 0, x.shape[-1])
    if bias is not None:
        out += _broadcast_channels(bias, out.ndim)
    return out


def correlate_last_vjp_input(upstream, kernel):
    """Adjoint of ``correlate_last`` with respect to its input."""
    return correlate_last(upstream, kernel.transpose(1, 0, 2)[:, :, ::-1])


def correlate_last_vjp_kernel(upstream, x, k):
    """Adjoint of ``correlate_last`` with respect to a kernel of extent ``k``."""
    pad = (k - 1) // 2
    padded = pad_last(x, pad)
    length = x.shape[-1]
    rest = tuple(range(1, x.ndim))
    grad = np.empty((upstream.shape[0], x.shape[0], k), dtype=upstream.dtype)
    for j in range(k):
        grad[:, :, j] = np.tensordot(upstream, padded[..., j:j + length], axes=(rest, rest))
    return grad


def _validate_conv1d(x, kernel, axis, bias):
    if axis not in AXES:
        raise ValueError(f"conv1d_axis: axis must be one of {AXES}, got {axis!r}")
    if x.ndim != 3:
        raise ShapeMismatchError('conv1d_axis input', ('C', 'H', 'W'), x.shape)
    if kernel.ndim != 3 or kernel.shape[2] % 2 == 0:
        raise ShapeMismatchError('conv1d_axis kernel', ('Cout', 'Cin', 'odd k'), kernel.shape)
    if kernel.shape[1] != x.shape[0]:
        raise ShapeMismatchError(
            'conv1d_axis kernel', (kernel.shape[0], x.shape[0], kernel.shape[2]), kernel.shape
        )
    if bias is not None and bias.shape != (kernel.shape[0],):
        raise ShapeMismatchError('conv1d_axis bias', (kernel.shape[0],), bias.shape)


def conv1d_axis(x, kernel, axis, bias=None):
    """
    1D channel-mixing cross-correlation of a ``C x H x W`` tensor.

    ``axis='row'`` slides the kernel along each row (the width axis),
    ``axis='column'`` along each column. Output spatial size equals
    the input's.
    """
    _validate_conv1d(x, kernel, axis, bias)
    if axis == ROW:
        return correlate_last(x, kernel, bias)
    out = correlate_last(x.transpose(0, 2, 1), kernel, bias)
    return np.ascontiguousarray(out.transpose(0, 2, 1))


def conv1d_axis_vjp(upstream, x, kernel, axis):
    """Gradients of ``conv1d_axis`` for input, kernel and bias."""
    _validate_conv1d(x, kernel, axis, None)
    expected = (kernel.shape[0],) + x.shape[1:]
    if upstream.shape != expected:
        raise ShapeMismatchError('conv1d_axis_vjp upstream', expected, upstream.shape)
    if axis == COLUMN:
        upstream = upstream.transpose(0, 2, 1)
        x = x.transpose(0, 2, 1)
    grad_x = correlate_last_vjp_input(upstream, kernel)
    grad_kernel = correlate_last_vjp_kernel(upstream, x, kernel.shape[2])
    grad_bias = upstream.sum(axis=(1, 2))
    if axis == COLUMN:
        grad_x = np.ascontiguousarray(grad_x.transpose(0, 2, 1))
    return grad_x, grad_kernel, grad_bias


def conv2d_dilated(x, kernel, bias=None, dilation=1):
    """
    Stride-1 dilated 2D cross-correlation, zero padded to keep ``H x W``.

    ``kernel`` is ``Cout x Cin x kh x kw`` with odd extents.
    """
    if x.ndim != 3 or kernel.ndim != 4 or kernel.shape[1] != x.shape[0]:
        raise ShapeMismatchError(
            'conv2d_dilated', (kernel.shape[0], x.shape[0]) + kernel.shape[2:], kernel.shape
        )
    _, height, width = x.shape
    kh, kw = kernel.shape[2:]
    ph, pw = dilation * (kh - 1) // 2, dilation * (kw - 1) // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    out = None
    for dy in range(kh):
        for dx in range(kw):
            window = padded[:, dy * dilation:dy * dilation + height, dx * dilation:dx * dilation + width]
            term = mix_channels(kernel[:, :, dy, dx], window)
            if out is None:
                out = term
            else:
                out += term
    if bias is not None:
        out += _broadcast_channels(bias, 3)
    return out


def conv2d_dilated_vjp(upstream, x, kernel, dilation=1):
    """Gradients of ``conv2d_dilated`` for input, kernel and bias."""
    _, height, width = x.shape
    kh, kw = kernel.shape[2:]
    if upstream.shape != (kernel.shape[0], height, width):
        raise ShapeMismatchError(
            'conv2d_dilated_vjp upstream', (kernel.shape[0], height, width), upstream.shape
        )
    ph, pw = dilation * (kh - 1) // 2, dilation * (kw - 1) // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    grad_padded = np.zeros_like(padded, dtype=upstream.dtype)
    grad_kernel = np.empty_like(kernel, dtype=upstream.dtype)
    for dy in range(kh):
        for dx in range(kw):
            rows = slice(dy * dilation, dy * dilation + height)
            cols = slice(dx * dilation, dx * dilation + width)
            grad_padded[:, rows, cols] += mix_channels(kernel[:, :, dy, dx].T, upstream)
            grad_kernel[:, :, dy, dx] = np.tensordot(
                upstream, padded[:, rows, cols], axes=([1, 2], [1, 2])
            )
    grad_x = grad_padded[:, ph:ph + height, pw:pw + width]
    return np.ascontiguousarray(grad_x), grad_kernel, upstream.sum(axis=(1, 2))


def pointwise_linear(x, weight, bias=None):
    """Per-pixel linear map ``Cin -> Cout`` (a 1x1 convolution)."""
    out = mix_channels(weight, x)
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise ShapeMismatchError('pointwise_linear bias', (weight.shape[0],), bias.shape)
        out += _broadcast_channels(bias, out.ndim)
    return out


def pointwise_linear_vjp(upstream, x, weight):
    """Gradients of ``pointwise_linear`` for input, weight and bias."""
    rest = tuple(range(1, x.ndim))
    grad_x = mix_channels(weight.T, upstream)
    grad_weight = np.tensordot(upstream, x, axes=(rest, rest))
    return grad_x, grad_weight, upstream.sum(axis=rest)


def relu(x):
    return np.maximum(x, 0)


def relu_vjp(upstream, x):
    return upstream * (x > 0)


def sigmoid(x):
    return special.expit(x)


def sigmoid_vjp(upstream, y):
    """Adjoint of ``sigmoid`` given its output ``y``."""
    return upstream * y * (1 - y)


def softmax_channels(scores):
    """Per-pixel softmax over axis 0; max-subtracted for stability."""
    if scores.ndim < 1 or scores.shape[0] < 1:
        raise ShapeMismatchError('softmax_channels', ('C>=1',), scores.shape)
    return special.softmax(scores, axis=0)


def softmax_channels_vjp(upstream, probs):
    """Adjoint of ``softmax_channels`` given its output."""
    return probs * (upstream - (upstream * probs).sum(axis=0, keepdims=True))


def _validate_target(scores, target, ignore_value):
    if target.shape != scores.shape[1:]:
        raise ShapeMismatchError('cross_entropy_masked target', scores.shape[1:], target.shape)
    valid = target != ignore_value
    if valid.any():
        labels = target[valid]
        if labels.min() < 0 or labels.max() >= scores.shape[0]:
            raise LabelValueError(
                f"cross_entropy_masked: target classes must lie in [0, {scores.shape[0]}) "
                f"or equal {ignore_value}, found range [{labels.min()}, {labels.max()}]"
            )
    return valid


def cross_entropy_masked(scores, target, ignore_value=255):
    """
    Mean per-pixel cross entropy over non-ignored pixels.

    A map with every pixel ignored has loss 0.
    """
    valid = _validate_target(scores, target, ignore_value)
    count = int(valid.sum())
    if count == 0:
        return 0.0
    log_probs = special.log_softmax(scores, axis=0)
    safe_target = np.where(valid, target, 0).astype(np.intp)
    picked = np.take_along_axis(log_probs, safe_target[None], axis=0)[0]
    return float(-picked[valid].sum() / count)


def cross_entropy_masked_vjp(scores, target, ignore_value=255, upstream=1.0):
    """Gradient of ``cross_entropy_masked`` with respect to the scores."""
    valid = _validate_target(scores, target, ignore_value)
    count = int(valid.sum())
    if count == 0:
        return np.zeros_like(scores)
    grad = softmax_channels(scores)
    safe_target = np.where(valid, target, 0).astype(np.intp)
    onehot = np.zeros_like(grad)
    np.put_along_axis(onehot, safe_target[None], 1, axis=0)
    grad = (grad - onehot) * valid
    return grad * (upstream / count)


def argmax_channels(scores):
    return np.argmax(scores, axis=0)
