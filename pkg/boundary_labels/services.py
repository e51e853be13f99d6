"""
Boundary-class ground truth and trimap bands.

A pixel is a boundary pixel when the Euclidean distance to the nearest
pixel carrying a different non-ignore label is strictly smaller than
the radius. Boundary pixels are relabelled to class N in an N+1 class
map. Ignore pixels are never relabelled and never count as a
differing label.

The rule is defined over the original map only: relabelling creates
new label differences, so applying it twice is not idempotent.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.conf import settings
from scipy import ndimage

from tensor_core.exceptions import LabelValueError, ShapeMismatchError

logger = logging.getLogger(__name__)


def default_ignore_value():
    return getattr(settings, 'BFP_IGNORE_VALUE', 255)


def default_radius():
    return getattr(settings, 'BFP_BOUNDARY_RADIUS', 9.0)


@dataclass
class LabelMap:
    """
    An ``H x W`` map of class indices in ``[0, num_classes)`` or ``ignore_value``.
    """
    values: np.ndarray
    num_classes: int
    ignore_value: int = 255

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or 0 in self.values.shape:
            raise ShapeMismatchError('LabelMap', ('H>0', 'W>0'), self.values.shape)
        if self.num_classes < 1:
            raise LabelValueError(f"num_classes must be positive, got {self.num_classes}")
        valid = self.valid_mask
        if valid.any():
            labels = self.values[valid]
            if labels.min() < 0 or labels.max() >= self.num_classes:
                raise LabelValueError(
                    f"Label values must lie in [0, {self.num_classes}) or equal "
                    f"{self.ignore_value}; found [{labels.min()}, {labels.max()}]"
                )

    @property
    def valid_mask(self):
        return self.values != self.ignore_value

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def infer(cls, values, ignore_value=None, num_classes: Optional[int] = None):
        """Build a map, inferring ``num_classes`` as the largest label plus one."""
        ignore_value = default_ignore_value() if ignore_value is None else ignore_value
        values = np.asarray(values)
        if num_classes is None:
            valid = values != ignore_value
            num_classes = int(values[valid].max()) + 1 if valid.any() else 1
        return cls(values=values, num_classes=num_classes, ignore_value=ignore_value)


def nearest_differing_distance(values, ignore_value):
    """
    Distance from each valid pixel to the nearest valid pixel with another label.

    Computed with one exact Euclidean distance transform per class.
    Pixels with no differing label anywhere (and ignore pixels) get ``inf``.
    """
    valid = values != ignore_value
    distance = np.full(values.shape, np.inf)
    for label in np.unique(values[valid]):
        others = valid & (values != label)
        if not others.any():
            continue
        to_others = ndimage.distance_transform_edt(~others)
        own = values == label
        distance[own] = to_others[own]
    return distance


def boundary_class(labels: LabelMap) -> int:
    """The class index N given to boundary pixels; it must not coincide with the ignore label."""
    if labels.num_classes == labels.ignore_value:
        raise LabelValueError(
            f"Boundary class {labels.num_classes} equals the ignore label; "
            f"boundary pixels would be dropped as ignore"
        )
    return labels.num_classes


def boundary_mask(values, radius, ignore_value):
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return nearest_differing_distance(values, ignore_value) < radius


def generate_boundary_labels(labels: LabelMap, radius=None) -> LabelMap:
    """
    Relabel pixels within ``radius`` of a label change to class N.

    An all-ignore map is returned unchanged (still as an N+1 class map).
    Raises ``LabelValueError`` when N equals the ignore label.
    """
    radius = default_radius() if radius is None else radius
    boundary = boundary_class(labels)
    augmented = labels.values.copy()
    if not labels.valid_mask.any():
        logger.warning('Label map holds only ignore pixels; no boundary generated')
    else:
        augmented[boundary_mask(labels.values, radius, labels.ignore_value)] = boundary
    return LabelMap(values=augmented, num_classes=labels.num_classes + 1,
                    ignore_value=labels.ignore_value)


def trimap_band_mask(labels: LabelMap, band):
    """Pixels closer than ``band`` to a label change; evaluation restricts to these."""
    return boundary_mask(labels.values, band, labels.ignore_value)


def brute_force_boundary_oracle(labels: LabelMap, radius) -> LabelMap:
    """
    All-pairs rendition of ``generate_boundary_labels`` for tests.

    Quadratic in the pixel count; keep inputs small.
    """
    boundary = boundary_class(labels)
    values = labels.values
    valid = labels.valid_mask
    rows, cols = np.nonzero(valid)
    augmented = values.copy()
    if rows.size:
        flat = values[rows, cols]
        squared = (rows[:, None] - rows[None, :]) ** 2 + (cols[:, None] - cols[None, :]) ** 2
        squared = np.where(flat[:, None] != flat[None, :], squared, np.iinfo(np.int64).max)
        nearest = squared.min(axis=1)
        reachable = nearest != np.iinfo(np.int64).max
        distance = np.sqrt(nearest.astype(np.float64))
        hit = reachable & (distance < radius)
        augmented[rows[hit], cols[hit]] = boundary
    return LabelMap(values=augmented, num_classes=labels.num_classes + 1,
                    ignore_value=labels.ignore_value)


def boundary_fraction(augmented: LabelMap) -> float:
    """Share of valid pixels carrying the boundary class."""
    valid = augmented.valid_mask
    if not valid.any():
        return 0.0
    boundary = augmented.values == augmented.num_classes - 1
    return float(boundary[valid].mean())
