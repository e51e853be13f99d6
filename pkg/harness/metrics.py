"""
Segmentation metrics: per-class IoU, mIoU, trimap-band mIoU and the
per-run MetricsReport.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from boundary_labels.services import LabelMap, generate_boundary_labels, trimap_band_mask
from confidence.services import boundary_confidence
from tensor_core.exceptions import ShapeMismatchError
from tensor_core.ops import argmax_channels

logger = logging.getLogger(__name__)


@dataclass
class IouResult:
    # None for classes absent from both maps
    per_class: List[Optional[float]]
    miou: Optional[float]
    pixels: int

    @property
    def defined(self):
        return self.miou is not None


@dataclass
class MetricsReport:
    variant: str
    seed: int
    steps: int
    num_classes: int
    per_class_iou: List[Optional[float]] = field(default_factory=list)
    miou: Optional[float] = None
    boundary_iou: Optional[float] = None
    pixel_accuracy: Optional[float] = None
    trimap: Dict[str, Optional[float]] = field(default_factory=dict)
    boundary_confidence_on_boundary: Optional[float] = None
    boundary_confidence_off_boundary: Optional[float] = None
    initial_loss: Optional[float] = None
    final_smoothed_loss: Optional[float] = None
    loss_curve: List[float] = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


def _values(labels):
    return labels.values if isinstance(labels, LabelMap) else np.asarray(labels)


def confusion_matrix(pred, gt, num_classes, ignore_value=255, mask=None):
    """``num_classes x num_classes`` counts, rows ground truth, columns prediction."""
    pred, gt = _values(pred), _values(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatchError('confusion_matrix prediction', gt.shape, pred.shape)
    region = (gt != ignore_value) & (pred != ignore_value)
    if mask is not None:
        if mask.shape != gt.shape:
            raise ShapeMismatchError('confusion_matrix mask', gt.shape, mask.shape)
        region &= mask
    index = gt[region].astype(np.int64) * num_classes + pred[region].astype(np.int64)
    return np.bincount(index, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def iou_from_confusion(confusion) -> IouResult:
    intersection = np.diag(confusion).astype(np.float64)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - np.diag(confusion)
    per_class = [
        float(inter / total) if total else None
        for inter, total in zip(intersection, union)
    ]
    present = [value for value in per_class if value is not None]
    pixels = int(confusion.sum())
    miou = float(np.mean(present)) if pixels and present else None
    return IouResult(per_class=per_class, miou=miou, pixels=pixels)


def evaluate_miou(pred, gt, num_classes, ignore_value=255, mask=None) -> IouResult:
    """
    IoU per class over non-ignored (and masked-in) pixels.

    An empty evaluation region leaves mIoU undefined (``None``), never 0.
    """
    result = iou_from_confusion(confusion_matrix(pred, gt, num_classes, ignore_value, mask))
    if not result.defined:
        logger.warning('mIoU undefined: the evaluation region holds no pixels')
    return result


def _validate_bands(band_widths):
    bands = [float(band) for band in band_widths]
    if any(band <= 0 for band in bands) or bands != sorted(set(bands)):
        raise ValueError(f"Trimap bands must be positive and strictly ascending, got {bands}")
    return bands


def evaluate_trimap(pred, gt: LabelMap, band_widths: Sequence[float]) -> Dict[float, Optional[float]]:
    """mIoU restricted to pixels closer than each band width to a ground-truth label change."""
    bands = _validate_bands(band_widths)
    return {
        band: evaluate_miou(pred, gt, gt.num_classes, gt.ignore_value,
                            trimap_band_mask(gt, band)).miou
        for band in bands
    }


def band_key(band):
    return f"{float(band):g}"


def evaluate_model(model, scenes, band_widths=(2.0, 4.0, 8.0), boundary_radius=None) -> Dict:
    """
    Dataset-level metrics: confusion counts are summed over scenes in
    order, so the result does not depend on how scenes are batched.

    Also reports the IoU of the boundary class of head 2 against the
    generated boundary ground truth and the mean boundary confidence on
    and off generated-boundary pixels.
    """
    bands = _validate_bands(band_widths)
    n = model.config.num_classes
    radius = model.config.boundary_radius if boundary_radius is None else boundary_radius
    confusion = np.zeros((n, n), dtype=np.int64)
    band_confusion = {band: np.zeros((n, n), dtype=np.int64) for band in bands}
    boundary_confusion = np.zeros((2, 2), dtype=np.int64)
    on_sum = off_sum = 0.0
    on_count = off_count = 0
    for scene in scenes:
        cache = model.forward(scene.image)
        pred = argmax_channels(cache.class_scores)
        gt = scene.labels
        confusion += confusion_matrix(pred, gt, n, gt.ignore_value)
        for band in bands:
            band_confusion[band] += confusion_matrix(
                pred, gt, n, gt.ignore_value, trimap_band_mask(gt, band))
        augmented = generate_boundary_labels(gt, radius)
        valid = augmented.valid_mask
        on_boundary = (augmented.values == n) & valid
        off_boundary = valid & ~on_boundary
        boundary_pred = (argmax_channels(cache.boundary_scores) == n).astype(np.int64)
        boundary_confusion += confusion_matrix(
            boundary_pred, on_boundary.astype(np.int64), 2, ignore_value=-1, mask=valid)
        b = boundary_confidence(cache.boundary_scores)
        on_sum += float(b[on_boundary].sum())
        off_sum += float(b[off_boundary].sum())
        on_count += int(on_boundary.sum())
        off_count += int(off_boundary.sum())
    overall = iou_from_confusion(confusion)
    pixels = int(confusion.sum())
    return {
        'per_class_iou': overall.per_class,
        'miou': overall.miou,
        'pixel_accuracy': float(np.trace(confusion) / pixels) if pixels else None,
        'trimap': {band_key(band): iou_from_confusion(band_confusion[band]).miou for band in bands},
        'boundary_iou': iou_from_confusion(boundary_confusion).per_class[1],
        'boundary_confidence_on_boundary': on_sum / on_count if on_count else None,
        'boundary_confidence_off_boundary': off_sum / off_count if off_count else None,
    }


EVALUATED_FIELDS = (
    'per_class_iou', 'miou', 'pixel_accuracy', 'boundary_iou',
    'boundary_confidence_on_boundary', 'boundary_confidence_off_boundary',
)
TRAINING_FIELDS = ('steps', 'initial_loss', 'final_smoothed_loss')


def same_value(first, second, tolerance):
    if first is None or second is None:
        return first is None and second is None
    return math.isclose(first, second, rel_tol=0.0, abs_tol=tolerance)


def compare_metrics(metrics, expected: MetricsReport, tolerance=0.0) -> List[str]:
    """Names of the evaluated fields that disagree with a pinned report."""
    differing = []
    for name in EVALUATED_FIELDS:
        ours, pinned = metrics[name], getattr(expected, name)
        if isinstance(ours, list):
            equal = len(ours) == len(pinned) and all(
                same_value(a, b, tolerance) for a, b in zip(ours, pinned))
        else:
            equal = same_value(ours, pinned, tolerance)
        if not equal:
            differing.append(name)
    for band, value in expected.trimap.items():
        if band not in metrics['trimap'] or not same_value(metrics['trimap'][band], value, tolerance):
            differing.append(f"trimap[{band}]")
    return differing


def compare_reports(report: MetricsReport, expected: MetricsReport, tolerance=0.0) -> List[str]:
    """
    Like ``compare_metrics``, but for a fresh training run: the step count
    and both losses must agree as well.
    """
    differing = [
        name for name in TRAINING_FIELDS
        if not same_value(getattr(report, name), getattr(expected, name), tolerance)
    ]
    return differing + compare_metrics(report.as_dict(), expected, tolerance)
