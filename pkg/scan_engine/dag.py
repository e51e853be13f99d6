"""
Pixel-by-pixel directed-acyclic-graph scan, the sequential reference
that the row-parallel scans are measured against.
"""

import logging

import numpy as np

from tensor_core.exceptions import ShapeMismatchError

from .params import DagParams, ScanDirection, StepCount
from .scans import from_canonical, to_canonical

logger = logging.getLogger(__name__)


def _validate(x, params):
    if x.ndim != 3 or 0 in x.shape:
        raise ShapeMismatchError('dag_scan input', ('C', 'H>0', 'W>0'), x.shape)
    cout = params.input_weight.shape[0]
    if params.input_weight.shape != (cout, x.shape[0]):
        raise ShapeMismatchError('DagParams input_weight', (cout, x.shape[0]),
                                 params.input_weight.shape)
    for name in ('north', 'west', 'north_west'):
        weight = getattr(params, name)
        if weight.shape != (cout, cout):
            raise ShapeMismatchError(f"DagParams {name}", (cout, cout), weight.shape)
    if params.bias.shape != (cout,):
        raise ShapeMismatchError('DagParams bias', (cout,), params.bias.shape)


def dag_scan(x, params: DagParams, direction):
    """
    Visit every pixel in scan order; each hidden state sees its three
    already-visited neighbours (vertical, horizontal and diagonal).

    Returns ``(output, StepCount)`` with one sequential step per pixel.
    """
    direction = ScanDirection(direction)
    if not direction.is_dag:
        raise ValueError(f"dag_scan: expected a DAG direction, got {direction.value}")
    _validate(x, params)
    flip_rows, flip_cols = direction.flips
    canonical = to_canonical(x, flip_rows, flip_cols, False)
    _, height, width = canonical.shape
    pixels = np.ascontiguousarray(np.moveaxis(canonical, 0, -1))
    hidden = np.zeros((height, width, params.input_weight.shape[0]),
                      dtype=np.result_type(canonical, params.input_weight))
    for r in range(height):
        for c in range(width):
            acc = params.input_weight @ pixels[r, c] + params.bias
            if r:
                acc += params.north @ hidden[r - 1, c]
            if c:
                acc += params.west @ hidden[r, c - 1]
            if r and c:
                acc += params.north_west @ hidden[r - 1, c - 1]
            hidden[r, c] = np.maximum(acc, 0)
    output = from_canonical(np.moveaxis(hidden, -1, 0), flip_rows, flip_cols, False)
    logger.debug(f"DAG scan {direction.value} over {height}x{width}: {height * width} steps")
    return output, StepCount(sequential_steps=height * width, parallel_width=1)
