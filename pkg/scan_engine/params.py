"""
Scan directions, learnable parameter bundles and step bookkeeping.
"""

from dataclasses import dataclass, fields
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from tensor_core.exceptions import ShapeMismatchError
from tensor_core.optim import init_uniform


class ScanDirection(models.TextChoices):
    """
    The six UAG directions plus the four pixel-by-pixel DAG directions.

    Second-stage scans run across columns on top of a first-stage
    parent: S.E and S.W on S, N.E and N.W on N.
    """
    SOUTH = 'S', _('South')
    NORTH = 'N', _('North')
    SOUTH_EAST = 'S.E', _('South then east')
    SOUTH_WEST = 'S.W', _('South then west')
    NORTH_EAST = 'N.E', _('North then east')
    NORTH_WEST = 'N.W', _('North then west')
    DAG_SOUTH_EAST = 'DAG-SE', _('DAG south-east')
    DAG_SOUTH_WEST = 'DAG-SW', _('DAG south-west')
    DAG_NORTH_EAST = 'DAG-NE', _('DAG north-east')
    DAG_NORTH_WEST = 'DAG-NW', _('DAG north-west')

    @property
    def is_first_stage(self):
        return self in FIRST_STAGE

    @property
    def is_second_stage(self):
        return self in SECOND_STAGE

    @property
    def is_dag(self):
        return self in DAG_DIRECTIONS

    @property
    def parent(self):
        return SECOND_STAGE_PARENT.get(self)

    @property
    def flips(self) -> Tuple[bool, bool]:
        """(flip rows, flip columns) that map this direction onto the canonical one."""
        return DIRECTION_FLIPS[self]


FIRST_STAGE = (ScanDirection.SOUTH, ScanDirection.NORTH)
SECOND_STAGE = (
    ScanDirection.SOUTH_EAST, ScanDirection.SOUTH_WEST,
    ScanDirection.NORTH_EAST, ScanDirection.NORTH_WEST,
)
DAG_DIRECTIONS = (
    ScanDirection.DAG_SOUTH_EAST, ScanDirection.DAG_SOUTH_WEST,
    ScanDirection.DAG_NORTH_EAST, ScanDirection.DAG_NORTH_WEST,
)
SECOND_STAGE_PARENT = {
    ScanDirection.SOUTH_EAST: ScanDirection.SOUTH,
    ScanDirection.SOUTH_WEST: ScanDirection.SOUTH,
    ScanDirection.NORTH_EAST: ScanDirection.NORTH,
    ScanDirection.NORTH_WEST: ScanDirection.NORTH,
}
# UAG pair emulating each DAG direction
DAG_EQUIVALENT = {
    ScanDirection.DAG_SOUTH_EAST: (ScanDirection.SOUTH, ScanDirection.SOUTH_EAST),
    ScanDirection.DAG_SOUTH_WEST: (ScanDirection.SOUTH, ScanDirection.SOUTH_WEST),
    ScanDirection.DAG_NORTH_EAST: (ScanDirection.NORTH, ScanDirection.NORTH_EAST),
    ScanDirection.DAG_NORTH_WEST: (ScanDirection.NORTH, ScanDirection.NORTH_WEST),
}
DIRECTION_FLIPS = {
    ScanDirection.SOUTH: (False, False),
    ScanDirection.NORTH: (True, False),
    ScanDirection.SOUTH_EAST: (False, False),
    ScanDirection.SOUTH_WEST: (False, True),
    ScanDirection.NORTH_EAST: (True, False),
    ScanDirection.NORTH_WEST: (True, True),
    ScanDirection.DAG_SOUTH_EAST: (False, False),
    ScanDirection.DAG_SOUTH_WEST: (False, True),
    ScanDirection.DAG_NORTH_EAST: (True, False),
    ScanDirection.DAG_NORTH_WEST: (True, True),
}


@dataclass
class StepCount:
    sequential_steps: int
    parallel_width: int

    def covers(self, height, width):
        return self.sequential_steps * self.parallel_width >= height * width


@dataclass
class ScanParams:
    """
    Weights of one UAG scan.

    ``input_kernel`` (U, Cout x Cin x k) convolves the scan input,
    ``recurrent_kernel`` (W, Cout x Cout x k) the gated previous hidden
    state, ``diagonal_kernel`` (W-hat, second stage only) the gated
    previous hidden state shifted by one position, ``bias`` is delta.
    All kernels run along the parallel axis of the scan.
    """
    input_kernel: np.ndarray
    recurrent_kernel: np.ndarray
    bias: np.ndarray
    diagonal_kernel: Optional[np.ndarray] = None

    @property
    def k(self):
        return self.input_kernel.shape[2]

    @property
    def in_channels(self):
        return self.input_kernel.shape[1]

    @property
    def out_channels(self):
        return self.input_kernel.shape[0]

    def validate(self, in_channels, second_stage):
        cout, k = self.out_channels, self.k
        if k % 2 == 0:
            raise ShapeMismatchError('ScanParams kernel extent', ('odd k',), (k,))
        if self.input_kernel.shape != (cout, in_channels, k):
            raise ShapeMismatchError('ScanParams input_kernel', (cout, in_channels, k),
                                     self.input_kernel.shape)
        if self.recurrent_kernel.shape != (cout, cout, k):
            raise ShapeMismatchError('ScanParams recurrent_kernel', (cout, cout, k),
                                     self.recurrent_kernel.shape)
        if self.bias.shape != (cout,):
            raise ShapeMismatchError('ScanParams bias', (cout,), self.bias.shape)
        if second_stage:
            if self.diagonal_kernel is None or self.diagonal_kernel.shape != (cout, cout, k):
                raise ShapeMismatchError(
                    'ScanParams diagonal_kernel', (cout, cout, k),
                    None if self.diagonal_kernel is None else self.diagonal_kernel.shape,
                )
        elif self.diagonal_kernel is not None:
            raise ShapeMismatchError('ScanParams diagonal_kernel (first stage)', None,
                                     self.diagonal_kernel.shape)

    def named_arrays(self) -> Iterator[Tuple[str, np.ndarray]]:
        for item in fields(self):
            value = getattr(self, item.name)
            if value is not None:
                yield item.name, value


def init_scan_params(rng, in_channels, channels, k=1, second_stage=False, dtype=np.float32):
    """Draw U, W, (W-hat) and delta uniformly in +-sqrt(1 / fan_in)."""
    input_kernel = init_uniform(rng, (channels, in_channels, k), in_channels * k, dtype)
    recurrent_kernel = init_uniform(rng, (channels, channels, k), channels * k, dtype)
    diagonal_kernel = None
    if second_stage:
        diagonal_kernel = init_uniform(rng, (channels, channels, k), channels * k, dtype)
    bias = init_uniform(rng, (channels,), in_channels * k, dtype)
    return ScanParams(input_kernel, recurrent_kernel, bias, diagonal_kernel)


@dataclass
class DagParams:
    """
    Per-pixel weights of the DAG oracle: one input map and three
    predecessor maps (north, west, north-west in canonical orientation).
    """
    input_weight: np.ndarray
    north: np.ndarray
    west: np.ndarray
    north_west: np.ndarray
    bias: np.ndarray


def init_dag_params(rng, in_channels, channels, dtype=np.float32):
    return DagParams(
        input_weight=init_uniform(rng, (channels, in_channels), in_channels, dtype),
        north=init_uniform(rng, (channels, channels), channels, dtype),
        west=init_uniform(rng, (channels, channels), channels, dtype),
        north_west=init_uniform(rng, (channels, channels), channels, dtype),
        bias=init_uniform(rng, (channels,), in_channels, dtype),
    )


BFP_SCANS = (
    ScanDirection.SOUTH, ScanDirection.NORTH,
    ScanDirection.SOUTH_EAST, ScanDirection.SOUTH_WEST,
    ScanDirection.NORTH_EAST, ScanDirection.NORTH_WEST,
)
# Concatenation order of the fused second-stage outputs
FUSION_ORDER = SECOND_STAGE


@dataclass
class BfpParams:
    """All weights of the propagation module: six scans plus the fusion projection."""
    scans: Dict[ScanDirection, ScanParams]
    projection: np.ndarray

    @property
    def channels(self):
        return self.scans[ScanDirection.SOUTH].out_channels

    def named_arrays(self, prefix='bfp') -> Iterator[Tuple[str, np.ndarray]]:
        for direction in BFP_SCANS:
            for name, value in self.scans[direction].named_arrays():
                yield f"{prefix}.{direction.value}.{name}", value
        yield f"{prefix}.projection", self.projection

    @classmethod
    def from_named(cls, arrays: Dict[str, np.ndarray], prefix='bfp'):
        """Rebuild a bundle whose arrays are views of ``arrays`` (shared storage)."""
        scans = {}
        for direction in BFP_SCANS:
            key = f"{prefix}.{direction.value}."
            scans[direction] = ScanParams(
                input_kernel=arrays[key + 'input_kernel'],
                recurrent_kernel=arrays[key + 'recurrent_kernel'],
                bias=arrays[key + 'bias'],
                diagonal_kernel=arrays.get(key + 'diagonal_kernel'),
            )
        return cls(scans=scans, projection=arrays[f"{prefix}.projection"])


def init_bfp_params(rng, in_channels, channels, k=1, out_channels=None, dtype=np.float32):
    out_channels = out_channels or channels
    scans = {}
    for direction in BFP_SCANS:
        if direction.is_first_stage:
            scans[direction] = init_scan_params(rng, in_channels, channels, k, False, dtype)
        else:
            scans[direction] = init_scan_params(rng, channels, channels, k, True, dtype)
    projection = init_uniform(rng, (out_channels, 4 * channels), 4 * channels, dtype)
    return BfpParams(scans=scans, projection=projection)
