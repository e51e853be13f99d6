"""
Central finite-difference checks for hand-written VJPs.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
# Below this magnitude an error is measured in absolute terms.
SCALE_FLOOR = 1e-3


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    tolerance: float
    points: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error) and self.max_rel_error < self.tolerance)


def relative_error(analytic, numeric):
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), SCALE_FLOOR)
    return np.abs(analytic - numeric) / scale


def numeric_gradient(func: Callable[[np.ndarray], float], x, indices, step=DEFAULT_STEP):
    """Central differences of the scalar ``func`` at the flat ``indices`` of ``x``."""
    probe = np.array(x, dtype=np.float64, copy=True)
    flat = probe.reshape(-1)
    estimates = np.empty(len(indices))
    for n, index in enumerate(indices):
        original = flat[index]
        flat[index] = original + step
        forward = func(probe)
        flat[index] = original - step
        backward = func(probe)
        flat[index] = original
        estimates[n] = (forward - backward) / (2 * step)
    return estimates


def max_gradient_error(func, x, analytic, points=20, rng: Optional[np.random.Generator] = None,
                       step=DEFAULT_STEP):
    """
    Worst relative error between ``analytic`` and central differences.

    ``points`` coordinates of ``x`` are sampled without replacement (all
    of them when ``x`` is smaller).
    """
    rng = rng or np.random.default_rng(0)
    size = int(np.size(x))
    count = min(points, size)
    indices = rng.choice(size, size=count, replace=False)
    numeric = numeric_gradient(func, x, indices, step)
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)[indices]
    return float(relative_error(analytic, numeric).max()) if count else 0.0


def check_vjp(name, func, x, analytic, tolerance, points=20, rng=None, step=DEFAULT_STEP):
    error = max_gradient_error(func, x, analytic, points=points, rng=rng, step=step)
    result = GradCheckResult(name=name, max_rel_error=error, tolerance=tolerance, points=points)
    if not result.passed:
        logger.warning(f"Gradient check {name} failed: {error:.3e} >= {tolerance:.1e}")
    return result
