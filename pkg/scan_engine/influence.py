"""
Empirical receptive fields: which output probes change when a single
input pixel is perturbed.
"""

import logging

import numpy as np

from tensor_core.exceptions import ShapeMismatchError

from .dag import dag_scan
from .params import BFP_SCANS, DAG_EQUIVALENT, BfpParams, DagParams, ScanDirection, ScanParams
from .scans import uag_scan, uag_scan_second

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1.0


def influence_masks(scan, base, epsilon=DEFAULT_EPSILON):
    """
    All receptive fields of ``scan`` at once.

    ``scan`` maps a ``C x H x W`` input to a ``C' x H x W`` output.
    The result is a boolean ``H x W x H x W`` array whose entry
    ``[r, c, r', c']`` tells whether output probe ``(r, c)`` changed
    (exact inequality in any channel) when every channel of input pixel
    ``(r', c')`` was raised by ``epsilon``.
    """
    base = np.asarray(base)
    if base.ndim != 3:
        raise ShapeMismatchError('influence input', ('C', 'H', 'W'), base.shape)
    _, height, width = base.shape
    reference = scan(base)
    masks = np.zeros((height, width, height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            perturbed = base.copy()
            perturbed[:, r, c] += epsilon
            masks[:, :, r, c] = (scan(perturbed) != reference).any(axis=0)
    logger.debug(f"Influence masks over {height}x{width} ({height * width} perturbations)")
    return masks


def influence_mask(scan, probe, base, epsilon=DEFAULT_EPSILON):
    """Receptive field of one output probe ``(r, c)`` as an ``H x W`` boolean map."""
    _, height, width = np.shape(base)
    r, c = probe
    if not (0 <= r < height and 0 <= c < width):
        raise ShapeMismatchError('influence probe', (height, width), probe)
    return influence_masks(scan, base, epsilon)[r, c]


def expected_region(direction, probe, shape):
    """
    The closed quadrant a DAG or stacked UAG scan in ``direction``
    should reach from ``probe``: rows and columns on the side the scan
    comes from, probe row and column included.
    """
    direction = ScanDirection(direction)
    flip_rows, flip_cols = direction.flips
    height, width = shape
    r, c = probe
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    row_ok = rows >= r if flip_rows else rows <= r
    col_ok = cols >= c if flip_cols else cols <= c
    return row_ok & col_ok


def active_scan_params(rng, channels, second_stage, k=1):
    """Positive weights: with positive inputs every ReLU stays active, so no dependency is masked."""
    return ScanParams(
        input_kernel=rng.uniform(0.2, 0.6, (channels, channels, k)),
        recurrent_kernel=rng.uniform(0.2, 0.6, (channels, channels, k)),
        bias=rng.uniform(0.1, 0.3, channels),
        diagonal_kernel=rng.uniform(0.2, 0.6, (channels, channels, k)) if second_stage else None,
    )


def active_dag_params(rng, channels):
    return DagParams(
        input_weight=rng.uniform(0.2, 0.6, (channels, channels)),
        north=rng.uniform(0.2, 0.6, (channels, channels)),
        west=rng.uniform(0.2, 0.6, (channels, channels)),
        north_west=rng.uniform(0.2, 0.6, (channels, channels)),
        bias=rng.uniform(0.1, 0.3, channels),
    )


def active_bfp_params(rng, channels):
    scans = {
        direction: active_scan_params(rng, channels, direction.is_second_stage)
        for direction in BFP_SCANS
    }
    return BfpParams(scans=scans, projection=rng.uniform(0.2, 0.6, (channels, 4 * channels)))


def uag_pair(first, second, dag_direction, gate=None):
    """The first-stage parent followed by its second-stage child, emulating ``dag_direction``."""
    parent, child = DAG_EQUIVALENT[ScanDirection(dag_direction)]

    def scan(values):
        return uag_scan_second(uag_scan(values, first, parent, gate).output, second, child, gate).output
    return scan


def family_masks(height, width, dag_direction, gate_open=True, channels=2, seed=0, variants=('uag', 'dag')):
    """
    Influence masks of the UAG pair and of the DAG scan for one
    direction family, on positive inputs with all-active weights.

    A closed gate zeroes the UAG gate map; the DAG oracle has no gate,
    so its predecessor weights are zeroed instead.
    """
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.5, 1.5, (channels, height, width))
    first = active_scan_params(rng, channels, False)
    second = active_scan_params(rng, channels, True)
    dag_params = active_dag_params(rng, channels)
    gate = None if gate_open else np.zeros((height, width))
    if not gate_open:
        zeros = np.zeros_like(dag_params.north)
        dag_params = DagParams(dag_params.input_weight, zeros, zeros, zeros, dag_params.bias)
    masks = {}
    if 'uag' in variants:
        masks['uag'] = influence_masks(uag_pair(first, second, dag_direction, gate), base)
    if 'dag' in variants:
        masks['dag'] = influence_masks(lambda values: dag_scan(values, dag_params, dag_direction)[0], base)
    return masks
