"""
Toy segmentation network with a boundary-aware propagation module.

Wiring: dilated 3x3 backbone -> boundary head (N + 1 scores) ->
boundary confidence -> propagation confidence -> propagation over the
backbone features -> class head (N scores). The class head is trained
on the original labels, the boundary head on the boundary-augmented
labels.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from confidence.services import (
    GateParams,
    boundary_confidence_vjp,
    propagation_confidence,
    propagation_confidence_vjp,
)
from scan_engine.bfp import BfpState, bfp_backward, bfp_forward
from scan_engine.params import BfpParams, init_bfp_params
from tensor_core.exceptions import MissingStateError, ShapeMismatchError
from tensor_core.ops import (
    argmax_channels,
    conv2d_dilated,
    conv2d_dilated_vjp,
    cross_entropy_masked,
    cross_entropy_masked_vjp,
    pointwise_linear,
    pointwise_linear_vjp,
    relu,
    relu_vjp,
    softmax_channels,
)
from tensor_core.optim import init_uniform

from .config import VARIANT_FIRST_STAGE_UNGATED, ModelConfig

logger = logging.getLogger(__name__)

BACKBONE_KERNEL = 3
BETA_PARAM = 'gate.beta'


@dataclass
class ForwardCache:
    image: np.ndarray
    backbone_inputs: List[np.ndarray]
    backbone_pre: List[np.ndarray]
    features: np.ndarray
    boundary_scores: np.ndarray
    boundary_probs: np.ndarray
    propagated: np.ndarray
    class_scores: np.ndarray
    boundary: Optional[np.ndarray] = None
    gate: Optional[np.ndarray] = None
    bfp_state: Optional[BfpState] = None


def expected_parameter_count(config: ModelConfig) -> int:
    """Closed-form size of every declared layer."""
    c, n, k = config.channels, config.num_classes, config.kernel_extent
    taps = BACKBONE_KERNEL * BACKBONE_KERNEL
    backbone = config.in_channels * c * taps + c + (config.depth - 1) * (c * c * taps + c)
    heads = (n + 1) * c + (n + 1) + n * c + n
    first_stage = 2 * (2 * c * c * k + c)
    second_stage = 4 * (3 * c * c * k + c)
    projection = c * 4 * c
    return backbone + heads + first_stage + second_stage + projection + 1


class ToyBfpNet:
    """
    Parameters live in one flat ``name -> array`` dict so the optimizer,
    storage and gradient checks treat them uniformly. Every variant
    draws the same parameters in the same order, so two variants built
    from one seed start from identical weights.
    """

    def __init__(self, config: ModelConfig, threads=None):
        if len(config.dilations) != config.depth:
            raise ShapeMismatchError('ModelConfig dilations', (config.depth,), (len(config.dilations),))
        if config.kernel_extent % 2 == 0:
            raise ShapeMismatchError('ModelConfig kernel_extent', ('odd',), (config.kernel_extent,))
        self.config = config
        self.threads = threads
        self.dtype = np.dtype(config.dtype)
        self.params: Dict[str, np.ndarray] = {}
        self._initialise()

    def _initialise(self):
        config = self.config
        rng = np.random.default_rng(config.seed)
        c, n = config.channels, config.num_classes
        in_channels = config.in_channels
        for index in range(config.depth):
            fan_in = in_channels * BACKBONE_KERNEL * BACKBONE_KERNEL
            self.params[f"backbone.{index}.weight"] = init_uniform(
                rng, (c, in_channels, BACKBONE_KERNEL, BACKBONE_KERNEL), fan_in, self.dtype)
            self.params[f"backbone.{index}.bias"] = init_uniform(rng, (c,), fan_in, self.dtype)
            in_channels = c
        self.params['boundary_head.weight'] = init_uniform(rng, (n + 1, c), c, self.dtype)
        self.params['boundary_head.bias'] = init_uniform(rng, (n + 1,), c, self.dtype)
        bfp = init_bfp_params(rng, c, c, k=config.kernel_extent, dtype=self.dtype)
        self.params.update(bfp.named_arrays())
        self.params['class_head.weight'] = init_uniform(rng, (n, c), c, self.dtype)
        self.params['class_head.bias'] = init_uniform(rng, (n,), c, self.dtype)
        self.params[BETA_PARAM] = np.array([config.beta], dtype=self.dtype)

    @property
    def parameter_count(self):
        return int(sum(value.size for value in self.params.values()))

    @property
    def bfp_params(self):
        return BfpParams.from_named(self.params)

    @property
    def gate_params(self):
        return GateParams(alpha=self.config.alpha, gamma=self.config.gamma,
                          beta=float(self.params[BETA_PARAM][0]))

    def clamp_beta(self):
        np.clip(self.params[BETA_PARAM], 0.0, 1.0, out=self.params[BETA_PARAM])

    def forward(self, image) -> ForwardCache:
        config = self.config
        if image.ndim != 3 or image.shape[0] != config.in_channels:
            raise ShapeMismatchError('ToyBfpNet image', (config.in_channels, 'H', 'W'), image.shape)
        x = image.astype(self.dtype, copy=False)
        inputs, pre = [], []
        for index, dilation in enumerate(config.dilations):
            inputs.append(x)
            z = conv2d_dilated(x, self.params[f"backbone.{index}.weight"],
                               self.params[f"backbone.{index}.bias"], dilation)
            pre.append(z)
            x = relu(z)
        features = x
        boundary_scores = pointwise_linear(
            features, self.params['boundary_head.weight'], self.params['boundary_head.bias'])
        boundary_probs = softmax_channels(boundary_scores)
        cache = ForwardCache(
            image=image, backbone_inputs=inputs, backbone_pre=pre, features=features,
            boundary_scores=boundary_scores, boundary_probs=boundary_probs,
            propagated=features, class_scores=None,
        )
        if config.uses_propagation:
            gate = None
            if config.gated:
                cache.boundary = boundary_probs[-1]
                gate = propagation_confidence(cache.boundary, self.gate_params)
                cache.gate = gate
            result = bfp_forward(
                features, gate, self.bfp_params,
                gate_first_stage=config.variant != VARIANT_FIRST_STAGE_UNGATED,
                threads=self.threads,
            )
            cache.propagated = result.output
            cache.bfp_state = result.state
        cache.class_scores = pointwise_linear(
            cache.propagated, self.params['class_head.weight'], self.params['class_head.bias'])
        return cache

    def predict(self, image):
        return argmax_channels(self.forward(image).class_scores)

    def loss(self, cache: ForwardCache, labels, boundary_labels):
        """``loss1 + lambda * loss2``; the backbone-only variant trains the class head alone."""
        loss = cross_entropy_masked(cache.class_scores, labels.values, labels.ignore_value)
        if self.config.uses_propagation and self.config.loss_weight:
            loss += self.config.loss_weight * cross_entropy_masked(
                cache.boundary_scores, boundary_labels.values, boundary_labels.ignore_value)
        return float(loss)

    def backward(self, cache: Optional[ForwardCache], labels, boundary_labels) -> Dict[str, np.ndarray]:
        if cache is None or cache.class_scores is None:
            raise MissingStateError('ToyBfpNet.backward needs the cache returned by forward')
        config = self.config
        grads = {name: np.zeros_like(value) for name, value in self.params.items()}

        grad_class = cross_entropy_masked_vjp(cache.class_scores, labels.values, labels.ignore_value)
        grad_boundary_scores = np.zeros_like(cache.boundary_scores)
        if config.uses_propagation and config.loss_weight:
            grad_boundary_scores += cross_entropy_masked_vjp(
                cache.boundary_scores, boundary_labels.values, boundary_labels.ignore_value,
                upstream=config.loss_weight,
            )

        grad_propagated, grads['class_head.weight'], grads['class_head.bias'] = pointwise_linear_vjp(
            grad_class, cache.propagated, self.params['class_head.weight'])

        if config.uses_propagation:
            bfp_grads = bfp_backward(grad_propagated, cache.bfp_state)
            grad_features = bfp_grads.features
            for name, value in bfp_grads.params.named_arrays():
                grads[name] = value
            if cache.gate is not None:
                grad_b, grad_beta = propagation_confidence_vjp(
                    bfp_grads.gate, cache.boundary, self.gate_params, config.stop_gradient)
                grads[BETA_PARAM] = np.array([grad_beta], dtype=self.dtype)
                grad_boundary_scores += boundary_confidence_vjp(
                    grad_b, cache.boundary_scores, cache.boundary_probs)
        else:
            grad_features = grad_propagated

        grad_head, grads['boundary_head.weight'], grads['boundary_head.bias'] = pointwise_linear_vjp(
            grad_boundary_scores, cache.features, self.params['boundary_head.weight'])
        grad_x = grad_features + grad_head

        for index in range(config.depth - 1, -1, -1):
            grad_z = relu_vjp(grad_x, cache.backbone_pre[index])
            grad_x, grads[f"backbone.{index}.weight"], grads[f"backbone.{index}.bias"] = conv2d_dilated_vjp(
                grad_z, cache.backbone_inputs[index], self.params[f"backbone.{index}.weight"],
                config.dilations[index],
            )
        return {name: value.astype(self.dtype, copy=False) for name, value in grads.items()}

    def loss_and_grads(self, image, labels, boundary_labels):
        cache = self.forward(image)
        return self.loss(cache, labels, boundary_labels), self.backward(cache, labels, boundary_labels)


def build_model(config: ModelConfig, threads=None) -> ToyBfpNet:
    model = ToyBfpNet(config, threads=threads)
    logger.info(
        f"Built {config.variant} model: {model.parameter_count} parameters, "
        f"{config.depth} backbone layers, dilations {list(config.dilations)}"
    )
    return model

