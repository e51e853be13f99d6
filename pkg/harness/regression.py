"""
The regression pin: the default toy run (seed 7, 2000 steps) trained once
and checked in under ``fixtures/regression``. Retraining or re-evaluating
must reproduce its metrics report exactly.
"""

import logging
from pathlib import Path
from typing import List, Optional

from .config import RunConfig
from .dataset import SynthScene, synth_dataset
from .metrics import MetricsReport
from .serializers import build_run_config
from .storage import CONFIG_NAME, REPORT_NAME, load_report, read_json

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).resolve().parent / 'fixtures'
REGRESSION_CONFIG = FIXTURES_DIR / 'regression.json'
REGRESSION_DIR = FIXTURES_DIR / 'regression'


def run_scenes(run_config: RunConfig) -> List[SynthScene]:
    dataset = run_config.dataset
    return synth_dataset(dataset.seed, dataset.count, dataset.size,
                         run_config.model.num_classes, dataset.max_shapes, dataset.noise)


def regression_config(path=REGRESSION_CONFIG) -> RunConfig:
    return build_run_config(read_json(path))


def pinned_config(directory=REGRESSION_DIR) -> Optional[RunConfig]:
    path = Path(directory) / CONFIG_NAME
    return build_run_config(read_json(path)) if path.exists() else None


def load_pin(directory=REGRESSION_DIR) -> Optional[MetricsReport]:
    """The pinned report, or None while no pin has been recorded."""
    path = Path(directory) / REPORT_NAME
    if not path.exists():
        logger.info(f"No regression pin under {directory}")
        return None
    return load_report(path)
