"""
Ablation grid: every variant trained under every seed on one shared
dataset, with per-variant aggregates.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import VARIANT_GATED, VARIANT_UNGATED, VARIANTS, RunConfig
from .dataset import synth_dataset
from .metrics import MetricsReport
from .model import build_model
from .training import train

logger = logging.getLogger(__name__)

AGGREGATED_FIELDS = ('miou', 'pixel_accuracy', 'boundary_iou', 'final_smoothed_loss')


@dataclass
class AblationRow:
    variant: str
    seed: int
    report: MetricsReport

    def as_dict(self):
        return {'variant': self.variant, 'seed': self.seed, 'report': self.report.as_dict()}


@dataclass
class Aggregate:
    """Mean and spread (population standard deviation) per metric over seeds."""
    variant: str
    seeds: List[int]
    mean: Dict[str, Optional[float]] = field(default_factory=dict)
    spread: Dict[str, Optional[float]] = field(default_factory=dict)

    def as_dict(self):
        return {'variant': self.variant, 'seeds': self.seeds, 'mean': self.mean, 'spread': self.spread}


@dataclass
class AblationTable:
    rows: List[AblationRow]
    aggregates: List[Aggregate]

    def as_dict(self):
        return {
            'rows': [row.as_dict() for row in self.rows],
            'aggregates': [aggregate.as_dict() for aggregate in self.aggregates],
            'trimap_gap': trimap_gap(self),
        }


def _metric_values(report: MetricsReport):
    values = {name: getattr(report, name) for name in AGGREGATED_FIELDS}
    for band, value in report.trimap.items():
        values[f"trimap_{band}"] = value
    return values


def aggregate(variant, rows: List[AblationRow]) -> Aggregate:
    result = Aggregate(variant=variant, seeds=[row.seed for row in rows])
    collected: Dict[str, List[float]] = {}
    for row in rows:
        for name, value in _metric_values(row.report).items():
            collected.setdefault(name, [])
            if value is not None:
                collected[name].append(value)
    for name, values in collected.items():
        result.mean[name] = float(np.mean(values)) if values else None
        result.spread[name] = float(np.std(values)) if values else None
    return result


def trimap_gap(table: AblationTable, first=VARIANT_GATED, second=VARIANT_UNGATED):
    """
    Mean trimap-band mIoU of ``first`` minus ``second`` per band, with
    the direction of the gap. Reported, never asserted.
    """
    by_variant = {item.variant: item for item in table.aggregates}
    if first not in by_variant or second not in by_variant:
        return {}
    gaps = {}
    for name, value in by_variant[first].mean.items():
        other = by_variant[second].mean.get(name)
        if not name.startswith('trimap_') or value is None or other is None:
            continue
        difference = value - other
        direction = 'higher' if difference > 0 else 'lower' if difference < 0 else 'equal'
        gaps[name[len('trimap_'):]] = {'difference': difference, 'direction': f"{first} {direction}"}
    return gaps


def ablation_grid(base: RunConfig, variants: Sequence[str], seeds: Sequence[int]) -> AblationTable:
    """
    Train one model per ``variant x seed``. The seed drives model
    initialisation and the training draws; every run sees the same
    dataset. Rows follow the order of ``variants`` then ``seeds``.
    """
    unknown = [variant for variant in variants if variant not in VARIANTS]
    if unknown:
        raise ValueError(f"Unknown ablation variants {unknown}; choose from {list(VARIANTS)}")
    dataset = base.dataset
    scenes = synth_dataset(
        dataset.seed, dataset.count, dataset.size, base.model.num_classes,
        dataset.max_shapes, dataset.noise,
    )
    rows: List[AblationRow] = []
    for variant in variants:
        for seed in seeds:
            model_config = replace(base.model, variant=variant, seed=seed,
                                   dilations=list(base.model.dilations))
            training_config = replace(base.training, seed=seed)
            logger.info(f"Ablation run: variant {variant}, seed {seed}")
            model = build_model(model_config, threads=training_config.threads)
            rows.append(AblationRow(variant=variant, seed=seed,
                                    report=train(model, scenes, training_config)))
    aggregates = []
    for variant in dict.fromkeys(variants):
        aggregates.append(aggregate(variant, [row for row in rows if row.variant == variant]))
    return AblationTable(rows=rows, aggregates=aggregates)
