from django.conf import settings
from rest_framework import serializers

from .config import (
    DEFAULT_DILATIONS,
    VARIANT_CHOICES,
    VARIANT_GATED,
    DatasetConfig,
    ModelConfig,
    RunConfig,
    TrainingConfig,
)


def _setting(name, default):
    return lambda: getattr(settings, name, default)


class StrictSerializer(serializers.Serializer):
    """Rejects keys that no field declares."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown field."] for key in unknown})
        return super().to_internal_value(data)


class ModelConfigSerializer(StrictSerializer):
    """
    Validates a toy model configuration, filling every omitted field
    with its default so the echoed config fully determines the run.
    """
    in_channels = serializers.IntegerField(default=3, min_value=1)
    channels = serializers.IntegerField(default=8, min_value=1)
    num_classes = serializers.IntegerField(default=5, min_value=2, max_value=254)
    depth = serializers.IntegerField(required=False, min_value=1)
    dilations = serializers.ListField(
        child=serializers.IntegerField(min_value=1),
        default=lambda: list(DEFAULT_DILATIONS),
        allow_empty=False,
    )
    kernel_extent = serializers.IntegerField(default=1, min_value=1)
    boundary_radius = serializers.FloatField(
        default=_setting('BFP_TOY_BOUNDARY_RADIUS', 3.0), min_value=0.0
    )
    alpha = serializers.FloatField(default=_setting('BFP_GATE_ALPHA', 20.0))
    gamma = serializers.FloatField(default=_setting('BFP_GATE_GAMMA', 4.0))
    beta = serializers.FloatField(default=_setting('BFP_GATE_BETA', 1.0), min_value=0.0, max_value=1.0)
    loss_weight = serializers.FloatField(default=1.0, min_value=0.0)
    variant = serializers.ChoiceField(choices=VARIANT_CHOICES, default=VARIANT_GATED)
    stop_gradient = serializers.BooleanField(default=False)
    seed = serializers.IntegerField(default=_setting('BFP_SEED', 7), min_value=0)
    dtype = serializers.ChoiceField(choices=['float32', 'float64'], default='float32')

    def validate_kernel_extent(self, value):
        if value % 2 == 0:
            raise serializers.ValidationError("Kernel extent must be odd.")
        return value

    def validate_boundary_radius(self, value):
        if value <= 0:
            raise serializers.ValidationError("Boundary radius must be positive.")
        return value

    def validate(self, attrs):
        depth = attrs.get('depth')
        if depth is None:
            attrs['depth'] = len(attrs['dilations'])
        elif depth != len(attrs['dilations']):
            raise serializers.ValidationError(
                f"Depth {depth} does not match {len(attrs['dilations'])} dilation rates."
            )
        return attrs

    def create(self, validated_data):
        return ModelConfig(**validated_data)


class TrainingConfigSerializer(StrictSerializer):
    steps = serializers.IntegerField(default=2000, min_value=0)
    base_lr = serializers.FloatField(default=0.01, min_value=0.0)
    total_iters = serializers.IntegerField(default=2000, min_value=1)
    momentum = serializers.FloatField(default=0.9, min_value=0.0, max_value=1.0)
    weight_decay = serializers.FloatField(default=1e-4, min_value=0.0)
    augment = serializers.BooleanField(default=True)
    flip_probability = serializers.FloatField(default=0.5, min_value=0.0, max_value=1.0)
    scale_min = serializers.FloatField(default=0.5, min_value=0.01)
    scale_max = serializers.FloatField(default=2.0, min_value=0.01)
    crop_size = serializers.IntegerField(allow_null=True, default=None, min_value=1)
    smoothing_window = serializers.IntegerField(default=50, min_value=1)
    log_every = serializers.IntegerField(default=50, min_value=1)
    threads = serializers.IntegerField(allow_null=True, default=None, min_value=1)
    seed = serializers.IntegerField(default=_setting('BFP_SEED', 7), min_value=0)
    trimap_bands = serializers.ListField(
        child=serializers.FloatField(min_value=0.0),
        default=lambda: [2.0, 4.0, 8.0],
    )

    def validate_trimap_bands(self, value):
        if any(band <= 0 for band in value) or list(value) != sorted(set(value)):
            raise serializers.ValidationError("Trimap bands must be positive and strictly ascending.")
        return value

    def validate(self, attrs):
        if attrs['scale_min'] > attrs['scale_max']:
            raise serializers.ValidationError("scale_min must not exceed scale_max.")
        if attrs['steps'] > attrs['total_iters']:
            raise serializers.ValidationError(
                f"steps ({attrs['steps']}) must not exceed total_iters ({attrs['total_iters']})."
            )
        return attrs

    def create(self, validated_data):
        return TrainingConfig(**validated_data)


class DatasetConfigSerializer(StrictSerializer):
    seed = serializers.IntegerField(default=_setting('BFP_SEED', 7), min_value=0)
    count = serializers.IntegerField(default=16, min_value=0)
    size = serializers.IntegerField(default=64, min_value=1)
    max_shapes = serializers.IntegerField(default=4, min_value=0)
    noise = serializers.FloatField(default=0.05, min_value=0.0)

    def create(self, validated_data):
        return DatasetConfig(**validated_data)


class RunConfigSerializer(StrictSerializer):
    """The ``--config`` file of ``train_toy``: model, training and dataset sections."""
    model = ModelConfigSerializer()
    training = TrainingConfigSerializer()
    dataset = DatasetConfigSerializer()

    def create(self, validated_data):
        return RunConfig(
            model=ModelConfig(**validated_data['model']),
            training=TrainingConfig(**validated_data['training']),
            dataset=DatasetConfig(**validated_data['dataset']),
        )


def build_model_config(data=None) -> ModelConfig:
    serializer = ModelConfigSerializer(data=data or {})
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def build_training_config(data=None) -> TrainingConfig:
    serializer = TrainingConfigSerializer(data=data or {})
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def build_run_config(data=None) -> RunConfig:
    sections = {'model': {}, 'training': {}, 'dataset': {}}
    sections.update(data or {})
    serializer = RunConfigSerializer(data=sections)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


class MetricsReportSerializer(serializers.Serializer):
    """Read-only JSON view of a ``MetricsReport``."""
    variant = serializers.CharField()
    seed = serializers.IntegerField()
    steps = serializers.IntegerField()
    num_classes = serializers.IntegerField()
    per_class_iou = serializers.ListField(child=serializers.FloatField(allow_null=True))
    miou = serializers.FloatField(allow_null=True)
    boundary_iou = serializers.FloatField(allow_null=True)
    pixel_accuracy = serializers.FloatField(allow_null=True)
    trimap = serializers.DictField(child=serializers.FloatField(allow_null=True))
    boundary_confidence_on_boundary = serializers.FloatField(allow_null=True)
    boundary_confidence_off_boundary = serializers.FloatField(allow_null=True)
    initial_loss = serializers.FloatField(allow_null=True)
    final_smoothed_loss = serializers.FloatField(allow_null=True)
    loss_curve = serializers.ListField(child=serializers.FloatField())
