"""
Sequential step accounting and wall-clock comparison of the DAG and
UAG scans.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from tensor_core.ops import pointwise_linear
from tensor_core.optim import init_uniform

from .dag import dag_scan
from .params import (
    BFP_SCANS,
    DAG_DIRECTIONS,
    init_bfp_params,
    init_dag_params,
)
from .scans import resolve_threads, uag_scan, uag_scan_second

logger = logging.getLogger(__name__)

# Feature-map extents (width, height) at stride 8 of the published inputs
PUBLISHED_SIZES = ((60, 45), (120, 90))
# Loop counts as printed for those inputs; the UAG column does not
# follow 2H + 4W and is reported alongside, never asserted.
PUBLISHED_LOOPS = {
    (60, 45): {'dag': 10800, 'uag': 300},
    (120, 90): {'dag': 43200, 'uag': 600},
}
BENCH_COLUMNS = ('resolution', 'variant', 'sequential_steps', 'wall_clock_ms', 'threads')


def count_steps(height, width) -> Dict[str, int]:
    """
    Sequential steps of a four-direction DAG pass versus the six UAG
    scans of one propagation module.
    """
    if height < 1 or width < 1:
        raise ValueError(f"count_steps: extents must be positive, got {height}x{width}")
    return {
        'dag_total': 4 * height * width,
        'uag_total': 2 * height + 4 * width,
    }


@dataclass
class BenchmarkRow:
    resolution: str
    variant: str
    sequential_steps: int
    wall_clock_ms: float
    threads: int

    def as_dict(self):
        return asdict(self)


def _best_of(repeats, func):
    best = None
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        elapsed = (time.perf_counter() - start) * 1000.0
        best = elapsed if best is None else min(best, elapsed)
    return best


def _run_dag(features, params):
    steps = 0
    for direction in DAG_DIRECTIONS:
        _, count = dag_scan(features, params, direction)
        steps += count.sequential_steps
    return steps


def _run_uag(features, params, threads):
    steps = 0
    first = {}
    for direction in BFP_SCANS:
        if direction.is_first_stage:
            result = uag_scan(features, params.scans[direction], direction, None, threads)
            first[direction] = result.output
        else:
            result = uag_scan_second(
                first[direction.parent], params.scans[direction], direction, None, threads
            )
        steps += result.steps.sequential_steps
    return steps


def run_benchmark(sizes: Sequence[Tuple[int, int]] = PUBLISHED_SIZES, channels=32,
                  threads=None, repeats=1, seed=0, include_fcn=True) -> List[BenchmarkRow]:
    """
    Time DAG (four directions) and UAG (six scans) on seeded random
    features for every ``(width, height)`` in ``sizes``.

    The ``fcn`` row times the per-pixel projection alone and has no
    sequential steps. Wall-clock is the best of ``repeats`` runs.
    """
    threads = resolve_threads(threads)
    if repeats < 1:
        raise ValueError(f"repeats must be at least 1, got {repeats}")
    rows = []
    for width, height in sizes:
        rng = np.random.default_rng(seed)
        features = rng.standard_normal((channels, height, width)).astype(np.float32)
        dag_params = init_dag_params(rng, channels, channels)
        uag_params = init_bfp_params(rng, channels, channels)
        resolution = f"{width}x{height}"
        expected = count_steps(height, width)

        if include_fcn:
            projection = init_uniform(rng, (channels, channels), channels)
            elapsed = _best_of(repeats, lambda: pointwise_linear(features, projection))
            rows.append(BenchmarkRow(resolution, 'fcn', 0, round(elapsed, 3), threads))

        dag_steps = []
        elapsed = _best_of(repeats, lambda: dag_steps.append(_run_dag(features, dag_params)))
        rows.append(BenchmarkRow(resolution, 'dag', dag_steps[-1], round(elapsed, 3), 1))

        uag_steps = []
        elapsed = _best_of(
            repeats, lambda: uag_steps.append(_run_uag(features, uag_params, threads))
        )
        rows.append(BenchmarkRow(resolution, 'uag', uag_steps[-1], round(elapsed, 3), threads))

        if dag_steps[-1] != expected['dag_total'] or uag_steps[-1] != expected['uag_total']:
            raise RuntimeError(
                f"Step count drift at {resolution}: dag={dag_steps[-1]} uag={uag_steps[-1]}, "
                f"expected {expected}"
            )
        published = PUBLISHED_LOOPS.get((width, height))
        logger.info(
            f"Bench {resolution}: dag {rows[-2].wall_clock_ms} ms / {dag_steps[-1]} steps, "
            f"uag {rows[-1].wall_clock_ms} ms / {uag_steps[-1]} steps"
            + (f" (published loops dag={published['dag']} uag={published['uag']})"
               if published else '')
        )
    return rows
