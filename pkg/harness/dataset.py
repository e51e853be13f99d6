"""
Seeded synthetic scenes: flat-colored ellipses and rectangles on a
background, with the matching label map.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image, ImageDraw
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from boundary_labels.pgm import read_label_pgm, write_label_pgm
from boundary_labels.services import LabelMap
from tensor_core.exceptions import TensorFormatError
from tensor_core.tensor_io import load_tensor, save_tensor

logger = logging.getLogger(__name__)

SHAPE_KINDS = ('ellipse', 'rectangle')
# Smallest canvas that still fits one shape with its margin
MIN_SCENE_SIZE = 8
PLACEMENT_ATTEMPTS = 25
SHAPE_MARGIN = 2
MANIFEST_NAME = 'manifest.json'


@dataclass
class PlacedShape:
    kind: str
    label: int
    # (x0, y0, x1, y1), both corners inclusive
    box: Tuple[int, int, int, int]


@dataclass
class SynthScene:
    image: np.ndarray
    labels: LabelMap
    shapes: List[PlacedShape] = field(default_factory=list)

    @property
    def size(self):
        return self.labels.shape


def _overlaps(box, other, margin):
    return not (
        box[2] + margin < other[0] or other[2] + margin < box[0]
        or box[3] + margin < other[1] or other[3] + margin < box[1]
    )


def _place_shapes(rng, size, num_classes, max_shapes, kinds):
    shapes: List[PlacedShape] = []
    if size < MIN_SCENE_SIZE or max_shapes == 0:
        return shapes
    low, high = max(2, size // 6), max(3, size // 3)
    for _ in range(int(rng.integers(1, max_shapes + 1))):
        kind = kinds[int(rng.integers(0, len(kinds)))]
        label = int(rng.integers(1, num_classes))
        for _attempt in range(PLACEMENT_ATTEMPTS):
            width, height = (int(v) for v in rng.integers(low, high + 1, size=2))
            x0 = int(rng.integers(0, size - width + 1))
            y0 = int(rng.integers(0, size - height + 1))
            box = (x0, y0, x0 + width - 1, y0 + height - 1)
            if not any(_overlaps(box, placed.box, SHAPE_MARGIN) for placed in shapes):
                shapes.append(PlacedShape(kind=kind, label=label, box=box))
                break
    return shapes


def render_labels(size, shapes: List[PlacedShape]) -> np.ndarray:
    canvas = Image.new('L', (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    for shape in shapes:
        if shape.kind == 'ellipse':
            draw.ellipse(shape.box, fill=shape.label)
        else:
            draw.rectangle(shape.box, fill=shape.label)
    return np.array(canvas, dtype=np.int64)


def synth_dataset(seed, count, size=64, num_classes=3, max_shapes=4, noise=0.05,
                  kinds=SHAPE_KINDS) -> List[SynthScene]:
    """
    Render ``count`` scenes of ``size x size`` pixels.

    Class 0 is background; shapes take classes ``1 .. num_classes - 1``
    and never touch each other. Every class has a fixed base color for
    the whole dataset, with Gaussian noise added per pixel. The same
    seed always yields the same scenes.
    """
    if num_classes < 2:
        raise ValueError(f"synth_dataset needs background plus one shape class, got {num_classes}")
    rng = np.random.default_rng(seed)
    palette = rng.uniform(0.1, 0.9, size=(num_classes, 3))
    scenes = []
    for index in range(count):
        shapes = _place_shapes(rng, size, num_classes, max_shapes, kinds)
        if not shapes:
            logger.warning(f"Scene {index} of size {size} holds no shapes (background only)")
        values = render_labels(size, shapes)
        image = palette[values] + rng.normal(0.0, noise, size=(size, size, 3))
        image = np.clip(image, 0.0, 1.0).transpose(2, 0, 1).astype(np.float32)
        scenes.append(SynthScene(
            image=np.ascontiguousarray(image),
            labels=LabelMap(values=values, num_classes=num_classes),
            shapes=shapes,
        ))
    logger.info(f"Rendered {count} synthetic scenes ({size}x{size}, {num_classes} classes, seed {seed})")
    return scenes


def export_scenes(scenes: List[SynthScene], directory):
    """Write images as portable tensors, labels as PGM, plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for index, scene in enumerate(scenes):
        stem = f"scene_{index:04d}"
        save_tensor(directory / f"{stem}.bfpt", scene.image)
        write_label_pgm(directory / f"{stem}.pgm", scene.labels.values,
                        num_classes=scene.labels.num_classes)
        names.append(stem)
    manifest = {
        'count': len(scenes),
        'num_classes': scenes[0].labels.num_classes if scenes else None,
        'ignore_value': scenes[0].labels.ignore_value if scenes else None,
        'scenes': names,
    }
    (directory / MANIFEST_NAME).write_bytes(JSONRenderer().render(manifest))
    logger.info(f"Exported {len(scenes)} scenes to {directory}")
    return directory


def load_scenes(directory) -> List[SynthScene]:
    directory = Path(directory)
    try:
        with open(directory / MANIFEST_NAME, 'rb') as stream:
            manifest = JSONParser().parse(stream)
    except FileNotFoundError:
        raise
    except Exception as exc:  # ParseError or a decoding failure
        raise TensorFormatError(f"{directory / MANIFEST_NAME}: unreadable manifest ({exc})") from exc
    scenes = []
    for stem in manifest.get('scenes', []):
        image = load_tensor(directory / f"{stem}.bfpt")
        values = read_label_pgm(directory / f"{stem}.pgm")
        labels = LabelMap(values=values, num_classes=manifest['num_classes'],
                          ignore_value=manifest['ignore_value'])
        if image.shape[1:] != labels.shape:
            raise TensorFormatError(
                f"{stem}: image {image.shape[1:]} and labels {labels.shape} disagree"
            )
        scenes.append(SynthScene(image=image, labels=labels))
    logger.info(f"Loaded {len(scenes)} scenes from {directory}")
    return scenes
