"""
Portable tensor files.

Layout: magic ``BFPT``, one byte dtype code (0 = float32, 1 = float64),
one byte rank, ``rank`` little-endian uint32 extents, then the values
in row-major order, little-endian.
"""

import logging
import struct
from pathlib import Path

import numpy as np

from .exceptions import TensorFormatError

logger = logging.getLogger(__name__)

MAGIC = b'BFPT'
DTYPE_CODES = {
    0: np.dtype('<f4'),
    1: np.dtype('<f8'),
}
_CODE_FOR_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def dumps_tensor(array) -> bytes:
    array = np.asarray(array)
    code = _CODE_FOR_KIND.get(array.dtype)
    if code is None:
        raise TensorFormatError(f"Unsupported dtype {array.dtype}; expected float32 or float64")
    if array.ndim > 255:
        raise TensorFormatError(f"Rank {array.ndim} does not fit in one byte")
    header = MAGIC + struct.pack('<BB', code, array.ndim)
    header += struct.pack(f'<{array.ndim}I', *array.shape)
    return header + np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes(order='C')


def loads_tensor(payload: bytes) -> np.ndarray:
    if len(payload) < 6 or payload[:4] != MAGIC:
        raise TensorFormatError('Missing BFPT magic bytes')
    code, rank = struct.unpack_from('<BB', payload, 4)
    if code not in DTYPE_CODES:
        raise TensorFormatError(f"Unknown dtype code {code}")
    offset = 6 + 4 * rank
    if len(payload) < offset:
        raise TensorFormatError('Truncated BFPT header')
    shape = struct.unpack_from(f'<{rank}I', payload, 6)
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) - offset != expected:
        raise TensorFormatError(
            f"BFPT body holds {len(payload) - offset} bytes, shape {shape} needs {expected}"
        )
    values = np.frombuffer(payload, dtype=dtype, offset=offset)
    return values.reshape(shape).astype(dtype.newbyteorder('='))


def save_tensor(path, array):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_tensor(array))
    logger.debug(f"Wrote tensor {np.shape(array)} to {path}")


def load_tensor(path) -> np.ndarray:
    return loads_tensor(Path(path).read_bytes())
