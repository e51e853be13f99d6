"""
Poly-schedule momentum SGD and seeded parameter initialisation.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Set

import numpy as np

from .exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)

POLY_POWER = 0.9


@dataclass
class OptimizerState:
    """
    Momentum buffers plus the fixed schedule hyperparameters.

    Buffers are created lazily, shape-matched to the parameter they
    track. Names in ``frozen`` are never updated.
    """
    base_lr: float = 0.01
    total_iters: int = 2000
    momentum: float = 0.9
    weight_decay: float = 1e-4
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    frozen: Set[str] = field(default_factory=set)


def poly_lr(base_lr, iteration, total_iters, power=POLY_POWER):
    """``base_lr * (1 - iteration / total_iters) ** power``."""
    if not 0 <= iteration < total_iters:
        raise ValueError(
            f"poly_lr: iteration must lie in [0, {total_iters}), got {iteration}"
        )
    return base_lr * (1.0 - iteration / total_iters) ** power


def sgd_poly_step(params, grads, state, iteration):
    """
    One classical momentum-SGD step, updating ``params`` in place.

    Weight decay is folded into the gradient before the momentum
    buffer: ``v = m * v + (g + wd * w)``, ``w -= lr * v``.
    """
    lr = poly_lr(state.base_lr, iteration, state.total_iters)
    for name in sorted(params):
        if name in state.frozen:
            continue
        weight = params[name]
        grad = grads[name]
        if grad.shape != weight.shape:
            raise ShapeMismatchError(f"sgd_poly_step grad '{name}'", weight.shape, grad.shape)
        buffer = state.buffers.get(name)
        if buffer is None:
            buffer = state.buffers[name] = np.zeros_like(weight)
        elif buffer.shape != weight.shape:
            raise ShapeMismatchError(f"sgd_poly_step buffer '{name}'", weight.shape, buffer.shape)
        buffer *= state.momentum
        buffer += grad + state.weight_decay * weight
        weight -= lr * buffer
    return params


def init_uniform(rng, shape, fan_in, dtype=np.float32):
    """Seeded uniform init in ``[-sqrt(1/fan_in), sqrt(1/fan_in)]``."""
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def parameter_count(params: Dict[str, np.ndarray], names: Iterable[str] = None) -> int:
    selected = params if names is None else {n: params[n] for n in names}
    return int(sum(v.size for v in selected.values()))
