"""
Binary PGM (P5) reading and writing through Pillow.

Label maps are written 8-bit when their class count and every stored value
fit in a byte, otherwise 16-bit big-endian as the PGM convention requires.
"""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from tensor_core.exceptions import TensorFormatError

logger = logging.getLogger(__name__)

GRAY_MODES = ('L', 'I', 'I;16', 'I;16B')


def read_label_pgm(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as image:
            if image.format != 'PPM' or image.mode not in GRAY_MODES:
                raise TensorFormatError(
                    f"{path}: expected a grayscale PGM, got {image.format} in mode {image.mode}"
                )
            values = np.array(image)
    except TensorFormatError:
        raise
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        logger.error(f"Could not read PGM {path}: {exc}")
        raise TensorFormatError(f"{path}: malformed PGM ({exc})") from exc
    return values.astype(np.int64)


def write_label_pgm(path, values, num_classes: Optional[int] = None):
    """
    Write a label map as binary PGM.

    ``num_classes`` fixes the bit depth by the class range rather than by the
    values present: 8-bit only when ``num_classes <= 255``.
    """
    values = np.asarray(values)
    if values.ndim != 2:
        raise TensorFormatError(f"PGM maps are two-dimensional, got shape {values.shape}")
    if values.size and (values.min() < 0 or values.max() > 65535):
        raise TensorFormatError(
            f"PGM values must lie in [0, 65535], found [{values.min()}, {values.max()}]"
        )
    fits_byte = values.size == 0 or values.max() <= 255
    if num_classes is not None:
        fits_byte = fits_byte and num_classes <= 255
    if fits_byte:
        image = Image.fromarray(values.astype(np.uint8), mode='L')
    else:
        image = Image.fromarray(values.astype(np.int32), mode='I')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format='PPM')
    logger.debug(f"Wrote {values.shape} label map to {path}")
