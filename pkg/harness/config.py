"""
Structured run configuration for the toy harness.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional

VARIANT_FCN = 'fcn'
VARIANT_UNGATED = 'ungated'
VARIANT_GATED = 'gated'
VARIANT_BETA_FROZEN = 'beta-frozen'
VARIANT_FIRST_STAGE_UNGATED = 'first-stage-ungated'

VARIANT_CHOICES = [
    (VARIANT_FCN, 'Backbone only, no propagation'),
    (VARIANT_UNGATED, 'Propagation without boundary gating'),
    (VARIANT_GATED, 'Boundary-gated propagation'),
    (VARIANT_BETA_FROZEN, 'Gated propagation with beta fixed'),
    (VARIANT_FIRST_STAGE_UNGATED, 'Gating on second-stage scans only'),
]
VARIANTS = tuple(choice for choice, _ in VARIANT_CHOICES)
GATED_VARIANTS = (VARIANT_GATED, VARIANT_BETA_FROZEN, VARIANT_FIRST_STAGE_UNGATED)

DEFAULT_DILATIONS = (1, 1, 2, 2, 4, 4)


@dataclass
class ModelConfig:
    in_channels: int = 3
    channels: int = 8
    num_classes: int = 5
    depth: int = 6
    dilations: List[int] = field(default_factory=lambda: list(DEFAULT_DILATIONS))
    kernel_extent: int = 1
    boundary_radius: float = 3.0
    alpha: float = 20.0
    gamma: float = 4.0
    beta: float = 1.0
    loss_weight: float = 1.0
    variant: str = VARIANT_GATED
    stop_gradient: bool = False
    seed: int = 7
    dtype: str = 'float32'

    @property
    def gated(self):
        return self.variant in GATED_VARIANTS

    @property
    def uses_propagation(self):
        return self.variant != VARIANT_FCN

    def as_dict(self):
        return asdict(self)


@dataclass
class TrainingConfig:
    steps: int = 2000
    base_lr: float = 0.01
    total_iters: int = 2000
    momentum: float = 0.9
    weight_decay: float = 1e-4
    augment: bool = True
    flip_probability: float = 0.5
    scale_min: float = 0.5
    scale_max: float = 2.0
    crop_size: Optional[int] = None
    smoothing_window: int = 50
    log_every: int = 50
    threads: Optional[int] = None
    seed: int = 7
    trimap_bands: List[float] = field(default_factory=lambda: [2.0, 4.0, 8.0])

    def as_dict(self):
        return asdict(self)


@dataclass
class DatasetConfig:
    seed: int = 7
    count: int = 16
    size: int = 64
    max_shapes: int = 4
    noise: float = 0.05

    def as_dict(self):
        return asdict(self)


@dataclass
class RunConfig:
    model: ModelConfig
    training: TrainingConfig
    dataset: DatasetConfig

    def as_dict(self):
        return {
            'model': self.model.as_dict(),
            'training': self.training.as_dict(),
            'dataset': self.dataset.as_dict(),
        }
