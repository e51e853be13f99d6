import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings as hypothesis_settings, strategies as st

from boundary_labels.pgm import read_label_pgm
from tensor_core.exceptions import ConfidenceRangeError, ShapeMismatchError
from tensor_core.gradcheck import max_gradient_error

from .services import (
    GateParams,
    boundary_confidence,
    boundary_confidence_vjp,
    clamp_beta,
    confidence_to_pgm,
    propagation_confidence,
    propagation_confidence_vjp,
)


class BoundaryConfidenceTests(SimpleTestCase):
    """Test boundary-channel extraction"""

    def test_uniform_scores(self):
        """Equal logits over five channels give 0.2 everywhere"""
        np.testing.assert_allclose(boundary_confidence(np.zeros((5, 3, 3))), 0.2, rtol=1e-15)

    def test_closed_form(self):
        scores = np.array([0.0, 0.0, math.log(2.0)]).reshape(3, 1, 1)
        self.assertAlmostEqual(float(boundary_confidence(scores)[0, 0]), 0.5, places=15)

    def test_saturation(self):
        scores = np.zeros((3, 2, 2))
        scores[-1] = 1e4
        np.testing.assert_array_equal(boundary_confidence(scores), 1.0)

    def test_single_channel_rejected(self):
        with self.assertRaises(ShapeMismatchError):
            boundary_confidence(np.zeros((1, 2, 2)))

    def test_vjp_matches_central_differences(self):
        rng = np.random.default_rng(0)
        scores = rng.standard_normal((4, 3, 5))
        weights = rng.standard_normal((3, 5))
        grad = boundary_confidence_vjp(weights, scores)
        error = max_gradient_error(
            lambda s: float((weights * boundary_confidence(s)).sum()), scores, grad
        )
        self.assertLess(error, 1e-6)


class PropagationConfidenceTests(SimpleTestCase):
    """Test the boundary gate"""

    def test_midpoint_is_one_half(self):
        """b = gamma / alpha gives p = 0.5 exactly"""
        self.assertEqual(float(propagation_confidence(np.array([0.2]), GateParams())[0]), 0.5)

    def test_zero_boundary(self):
        p = float(propagation_confidence(np.array([0.0]), GateParams())[0])
        self.assertAlmostEqual(p, 0.98201, places=5)
        self.assertAlmostEqual(p, 1 - 1 / (1 + math.exp(4)), places=14)

    def test_zero_beta_disables_gating(self):
        b = np.random.default_rng(1).uniform(0, 1, (4, 4))
        p = propagation_confidence(b, GateParams(beta=0.0))
        self.assertTrue(np.array_equal(p, np.ones((4, 4))))

    def test_out_of_range_rejected(self):
        with self.assertRaises(ConfidenceRangeError):
            propagation_confidence(np.array([1.2]), GateParams())
        with self.assertRaises(ConfidenceRangeError):
            propagation_confidence(np.array([np.nan]), GateParams())

    @hypothesis_settings(max_examples=60, deadline=None)
    @given(
        low=st.floats(0.0, 1.0),
        high=st.floats(0.0, 1.0),
        beta=st.floats(0.01, 1.0),
    )
    def test_range_and_monotonicity(self, low, high, beta):
        """p stays inside [1 - beta, 1] and never increases with b"""
        low, high = min(low, high), max(low, high)
        p = propagation_confidence(np.array([low, high]), GateParams(beta=beta))
        self.assertTrue(((p >= 1 - beta) & (p <= 1)).all())
        self.assertGreaterEqual(p[0], p[1])

    def test_strictly_decreasing_on_a_grid(self):
        p = propagation_confidence(np.linspace(0, 0.6, 61), GateParams(beta=0.5))
        self.assertTrue((np.diff(p) < 0).all())

    def test_vjp_matches_central_differences(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            b = rng.uniform(0.05, 0.95, (3, 4))
            weights = rng.standard_normal((3, 4))
            params = GateParams(beta=float(rng.uniform(0.1, 1.0)))
            grad_b, grad_beta = propagation_confidence_vjp(weights, b, params)
            loss = lambda v: float((weights * propagation_confidence(v, params)).sum())
            self.assertLess(max_gradient_error(loss, b, grad_b), 1e-6)

            def beta_loss(value):
                gate = GateParams(alpha=params.alpha, gamma=params.gamma, beta=float(value[0]))
                return float((weights * propagation_confidence(b, gate)).sum())

            self.assertLess(
                max_gradient_error(beta_loss, np.array([params.beta]), np.array([grad_beta])), 1e-6
            )

    def test_stop_gradient_blocks_boundary_path(self):
        b = np.full((2, 2), 0.3)
        grad_b, grad_beta = propagation_confidence_vjp(np.ones((2, 2)), b, GateParams(), stop_gradient=True)
        self.assertFalse(grad_b.any())
        self.assertLess(grad_beta, 0)

    def test_clamp_beta(self):
        self.assertEqual(clamp_beta(GateParams(beta=1.7)).beta, 1.0)
        self.assertEqual(clamp_beta(GateParams(beta=-0.2)).beta, 0.0)
        self.assertEqual(clamp_beta(GateParams(beta=0.4)).beta, 0.4)

    @override_settings(BFP_GATE_ALPHA=10.0, BFP_GATE_GAMMA=2.0, BFP_GATE_BETA=0.5)
    def test_constants_from_settings(self):
        params = GateParams.from_settings()
        self.assertEqual((params.alpha, params.gamma, params.beta), (10.0, 2.0, 0.5))


class ConfidenceExportTests(SimpleTestCase):
    """Test visual export of confidence maps"""

    def test_rounded_levels(self):
        values = np.array([[0.0, 0.5], [1.0, 0.2]])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'p.pgm'
            levels = confidence_to_pgm(values, path)
            restored = read_label_pgm(path)
        np.testing.assert_array_equal(levels, [[0, 128], [255, 51]])
        np.testing.assert_array_equal(restored, levels)

    def test_out_of_range_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfidenceRangeError):
                confidence_to_pgm(np.array([[1.5]]), Path(tmp) / 'bad.pgm')
