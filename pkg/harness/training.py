"""
Toy training loop: seeded augmentation, dual loss, poly-schedule SGD.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from boundary_labels.services import LabelMap, generate_boundary_labels
from tensor_core.exceptions import DivergenceError
from tensor_core.optim import OptimizerState, sgd_poly_step

from .config import VARIANT_FIRST_STAGE_UNGATED, VARIANT_GATED, TrainingConfig
from .metrics import MetricsReport, evaluate_model
from .model import BETA_PARAM, ToyBfpNet

logger = logging.getLogger(__name__)

# Variants that update beta; everywhere else it stays at its configured value
LEARNED_BETA_VARIANTS = (VARIANT_GATED, VARIANT_FIRST_STAGE_UNGATED)


def _resize_image(image, height, width):
    channels = [
        np.asarray(Image.fromarray(np.ascontiguousarray(channel, dtype=np.float32), mode='F')
                   .resize((width, height), Image.Resampling.BILINEAR))
        for channel in image
    ]
    return np.stack(channels).astype(image.dtype, copy=False)


def _resize_labels(values, height, width):
    resized = Image.fromarray(values.astype(np.int32), mode='I').resize(
        (width, height), Image.Resampling.NEAREST)
    return np.asarray(resized).astype(values.dtype)


def _fit(image, values, size, ignore_value, rng):
    """Pad (labels with ``ignore_value``) or randomly crop both maps to ``size x size``."""
    _, height, width = image.shape
    pad_h, pad_w = max(size - height, 0), max(size - width, 0)
    if pad_h or pad_w:
        image = np.pad(image, ((0, 0), (0, pad_h), (0, pad_w)))
        values = np.pad(values, ((0, pad_h), (0, pad_w)), constant_values=ignore_value)
        height, width = values.shape
    top = int(rng.integers(0, height - size + 1))
    left = int(rng.integers(0, width - size + 1))
    return (
        np.ascontiguousarray(image[:, top:top + size, left:left + size]),
        np.ascontiguousarray(values[top:top + size, left:left + size]),
    )


def augment(image, labels: LabelMap, config: TrainingConfig, rng) -> Tuple[np.ndarray, LabelMap]:
    """
    Random horizontal flip, random resize in ``[scale_min, scale_max]``
    (bilinear for the image, nearest for labels), then pad or crop back
    to ``crop_size`` (the scene size when unset).
    """
    values = labels.values
    size = config.crop_size or labels.shape[0]
    if rng.random() < config.flip_probability:
        image = image[:, :, ::-1]
        values = values[:, ::-1]
    scale = rng.uniform(config.scale_min, config.scale_max)
    height = max(1, int(round(labels.shape[0] * scale)))
    width = max(1, int(round(labels.shape[1] * scale)))
    image = _resize_image(image, height, width)
    values = _resize_labels(np.ascontiguousarray(values), height, width)
    image, values = _fit(image, values, size, labels.ignore_value, rng)
    return image, LabelMap(values=values, num_classes=labels.num_classes,
                           ignore_value=labels.ignore_value)


def smoothed_losses(curve: List[float], window: int) -> List[float]:
    """Trailing moving average; the first entries average what is available."""
    if not curve:
        return []
    sums = np.cumsum(np.asarray(curve, dtype=np.float64))
    smoothed = []
    for index in range(len(curve)):
        start = index - window
        total = sums[index] - (sums[start] if start >= 0 else 0.0)
        smoothed.append(float(total / min(index + 1, window)))
    return smoothed


def mean_loss(model: ToyBfpNet, scenes) -> Optional[float]:
    if not scenes:
        return None
    losses = []
    for scene in scenes:
        boundary = generate_boundary_labels(scene.labels, model.config.boundary_radius)
        losses.append(model.loss(model.forward(scene.image), scene.labels, boundary))
    return float(np.mean(losses))


def optimizer_for(model: ToyBfpNet, config: TrainingConfig) -> OptimizerState:
    frozen = set() if model.config.variant in LEARNED_BETA_VARIANTS else {BETA_PARAM}
    return OptimizerState(
        base_lr=config.base_lr, total_iters=config.total_iters, momentum=config.momentum,
        weight_decay=config.weight_decay, frozen=frozen,
    )


def train(model: ToyBfpNet, scenes, config: TrainingConfig, steps=None) -> MetricsReport:
    """
    Run ``steps`` SGD iterations (``config.steps`` when omitted) and
    evaluate on the training scenes.

    Each step draws one scene and its augmentation from a generator
    seeded by ``config.seed``. A non-finite loss aborts the run with
    ``DivergenceError`` naming the step.
    """
    steps = config.steps if steps is None else steps
    if steps < 0 or steps > config.total_iters:
        raise ValueError(f"steps must lie in [0, {config.total_iters}], got {steps}")
    if steps and not scenes:
        raise ValueError('Cannot train on an empty dataset')
    if config.threads is not None:
        model.threads = config.threads
    rng = np.random.default_rng(config.seed)
    state = optimizer_for(model, config)
    report = MetricsReport(
        variant=model.config.variant, seed=model.config.seed, steps=steps,
        num_classes=model.config.num_classes,
    )
    report.initial_loss = mean_loss(model, scenes)
    logger.info(
        f"Training {model.config.variant} for {steps} steps on {len(scenes)} scenes "
        f"(seed {config.seed}, initial loss {report.initial_loss})"
    )
    for step in range(steps):
        scene = scenes[int(rng.integers(0, len(scenes)))]
        if config.augment:
            image, labels = augment(scene.image, scene.labels, config, rng)
        else:
            image, labels = scene.image, scene.labels
        boundary = generate_boundary_labels(labels, model.config.boundary_radius)
        loss, grads = model.loss_and_grads(image, labels, boundary)
        if not np.isfinite(loss):
            logger.error(f"Training diverged at step {step}: loss {loss}")
            raise DivergenceError(step, loss)
        sgd_poly_step(model.params, grads, state, step)
        model.clamp_beta()
        report.loss_curve.append(loss)
        if (step + 1) % config.log_every == 0:
            window = report.loss_curve[-config.smoothing_window:]
            logger.info(f"Step {step + 1}/{steps}: loss {loss:.4f}, smoothed {np.mean(window):.4f}")
    if report.loss_curve:
        report.final_smoothed_loss = smoothed_losses(report.loss_curve, config.smoothing_window)[-1]
    if scenes:
        for key, value in evaluate_model(model, scenes, config.trimap_bands).items():
            setattr(report, key, value)
    logger.info(
        f"Finished {model.config.variant}: mIoU {report.miou}, "
        f"smoothed loss {report.final_smoothed_loss}"
    )
    return report
