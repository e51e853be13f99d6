import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from . import ops
from .exceptions import LabelValueError, ShapeMismatchError, TensorFormatError
from .gradcheck import check_vjp, max_gradient_error
from .optim import OptimizerState, init_uniform, poly_lr, sgd_poly_step
from .tensor_io import dumps_tensor, load_tensor, loads_tensor, save_tensor


def away_from_kink(rng, shape, margin=1e-3):
    """Random values with every entry at least ``margin`` away from zero."""
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * (margin + np.abs(x)), x)


class Conv1dAxisTests(SimpleTestCase):
    """Test the row/column 1D convolution and its adjoint"""

    def test_identity_kernel_k1(self):
        """A 1-tap unit kernel returns the input"""
        x = np.random.default_rng(1).standard_normal((1, 5, 6)).astype(np.float32)
        kernel = np.ones((1, 1, 1), dtype=np.float32)
        for axis in ops.AXES:
            out = ops.conv1d_axis(x, kernel, axis, np.zeros(1, dtype=np.float32))
            np.testing.assert_array_equal(out, x)

    def test_centered_delta_is_bit_exact_identity(self):
        """The [0, 1, 0] kernel reproduces the input bit for bit"""
        x = np.random.default_rng(2).standard_normal((1, 4, 7))
        kernel = np.array([[[0.0, 1.0, 0.0]]])
        for axis in ops.AXES:
            out = ops.conv1d_axis(x, kernel, axis, np.zeros(1))
            self.assertTrue(np.array_equal(out, x))

    def test_hand_unrolled_row(self):
        """Row [1, 2, 3] with kernel [1, 1, 1] gives [3, 6, 5]"""
        x = np.array([[[1.0, 2.0, 3.0]]])
        out = ops.conv1d_axis(x, np.ones((1, 1, 3)), ops.ROW, np.zeros(1))
        np.testing.assert_array_equal(out[0, 0], [3.0, 6.0, 5.0])
        column = ops.conv1d_axis(x.transpose(0, 2, 1), np.ones((1, 1, 3)), ops.COLUMN)
        np.testing.assert_array_equal(column[0, :, 0], [3.0, 6.0, 5.0])

    def test_channel_mismatch_reports_dimensions(self):
        """Kernel input channels must match the tensor"""
        with self.assertRaises(ShapeMismatchError) as ctx:
            ops.conv1d_axis(np.zeros((2, 3, 3)), np.zeros((1, 3, 1)), ops.ROW)
        self.assertIn('(1, 2, 1)', str(ctx.exception))

    def test_even_kernel_rejected(self):
        """Even kernel extents have no centre tap"""
        with self.assertRaises(ShapeMismatchError):
            ops.conv1d_axis(np.zeros((1, 3, 3)), np.zeros((1, 1, 2)), ops.ROW)

    def test_vjp_identity_and_zero(self):
        """Identity kernel passes the upstream through; zero upstream gives zeros"""
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 4, 4))
        g = rng.standard_normal((1, 4, 4))
        grad_x, _, _ = ops.conv1d_axis_vjp(g, x, np.ones((1, 1, 1)), ops.ROW)
        np.testing.assert_array_equal(grad_x, g)
        zeros = ops.conv1d_axis_vjp(np.zeros((2, 4, 4)), x, rng.standard_normal((2, 1, 3)), ops.COLUMN)
        for grad in zeros:
            self.assertFalse(grad.any())

    def test_vjp_matches_finite_differences(self):
        """Input, kernel and bias gradients match central differences"""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            axis = ops.AXES[seed % 2]
            cin, cout, k = (1, 1, 3) if seed == 0 else (2, 3, 3)
            x = rng.standard_normal((cin, 4, 4))
            kernel = rng.standard_normal((cout, cin, k))
            bias = rng.standard_normal(cout)
            weights = rng.standard_normal((cout, 4, 4))
            grad_x, grad_k, grad_b = ops.conv1d_axis_vjp(weights, x, kernel, axis)
            tolerance = 1e-6 if seed == 0 else 1e-4
            checks = [
                (lambda v: float((weights * ops.conv1d_axis(v, kernel, axis, bias)).sum()), x, grad_x),
                (lambda v: float((weights * ops.conv1d_axis(x, v, axis, bias)).sum()), kernel, grad_k),
                (lambda v: float((weights * ops.conv1d_axis(x, kernel, axis, v)).sum()), bias, grad_b),
            ]
            for func, point, analytic in checks:
                self.assertTrue(check_vjp('conv1d_axis', func, point, analytic, tolerance, rng=rng).passed)

    def test_chunked_window_is_bit_identical(self):
        """Splitting positions into windows does not change any output bit"""
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 17)).astype(np.float32)
        kernel = rng.standard_normal((4, 3, 3)).astype(np.float32)
        padded = ops.pad_last(x, 1)
        whole = ops.correlate_window(padded, kernel, 0, 17)
        pieces = np.concatenate([
            ops.correlate_window(padded, kernel, lo, hi) for lo, hi in [(0, 5), (5, 6), (6, 17)]
        ], axis=-1)
        self.assertTrue(np.array_equal(whole, pieces))


class Conv2dAndLinearTests(SimpleTestCase):
    """Test the backbone convolution and per-pixel projection"""

    def test_dilated_conv_keeps_size(self):
        """Zero padding equal to the dilation keeps H x W"""
        x = np.ones((2, 9, 7))
        out = ops.conv2d_dilated(x, np.ones((3, 2, 3, 3)), np.zeros(3), dilation=4)
        self.assertEqual(out.shape, (3, 9, 7))
        # four of the nine taps land inside the image at the corner
        self.assertEqual(out[0, 0, 0], 8.0)

    def test_dilated_conv_vjp(self):
        """Dilated convolution gradients match central differences"""
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 6, 5))
        kernel = rng.standard_normal((3, 2, 3, 3))
        bias = rng.standard_normal(3)
        weights = rng.standard_normal((3, 6, 5))
        grad_x, grad_k, grad_b = ops.conv2d_dilated_vjp(weights, x, kernel, dilation=2)
        loss = lambda v, k=kernel, b=bias: float((weights * ops.conv2d_dilated(v, k, b, 2)).sum())
        self.assertLess(max_gradient_error(loss, x, grad_x), 1e-4)
        self.assertLess(max_gradient_error(lambda k: loss(x, k), kernel, grad_k), 1e-4)
        self.assertLess(max_gradient_error(lambda b: loss(x, kernel, b), bias, grad_b), 1e-4)

    def test_pointwise_linear_vjp(self):
        """Per-pixel projection gradients match central differences"""
        rng = np.random.default_rng(6)
        x = rng.standard_normal((4, 3, 3))
        weight = rng.standard_normal((2, 4))
        weights = rng.standard_normal((2, 3, 3))
        grad_x, grad_w, _ = ops.pointwise_linear_vjp(weights, x, weight)
        self.assertLess(max_gradient_error(
            lambda v: float((weights * ops.pointwise_linear(v, weight)).sum()), x, grad_x), 1e-6)
        self.assertLess(max_gradient_error(
            lambda w: float((weights * ops.pointwise_linear(x, w)).sum()), weight, grad_w), 1e-6)


class ActivationTests(SimpleTestCase):
    """Test ReLU, sigmoid and softmax"""

    def test_relu_values(self):
        np.testing.assert_array_equal(ops.relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_sigmoid_values(self):
        self.assertEqual(ops.sigmoid(np.float64(0.0)), 0.5)
        self.assertAlmostEqual(float(ops.sigmoid(np.float64(-4.0))), 0.0179862099620915, places=12)

    def test_elementwise_vjps(self):
        """ReLU and sigmoid adjoints match central differences within 1e-6"""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = away_from_kink(rng, (4, 4))
            weights = rng.uniform(-1, 1, (4, 4))
            relu_grad = ops.relu_vjp(weights, x)
            self.assertTrue(check_vjp(
                'relu', lambda v: float((weights * ops.relu(v)).sum()), x, relu_grad, 1e-6).passed)
            sigmoid_grad = ops.sigmoid_vjp(weights, ops.sigmoid(x))
            self.assertTrue(check_vjp(
                'sigmoid', lambda v: float((weights * ops.sigmoid(v)).sum()), x, sigmoid_grad, 1e-6).passed)

    def test_softmax_examples(self):
        """Uniform, single-channel and closed-form softmax values"""
        np.testing.assert_allclose(ops.softmax_channels(np.zeros((4, 2, 2))), 0.25)
        np.testing.assert_array_equal(ops.softmax_channels(np.full((1, 3, 3), 7.0)), 1.0)
        probs = ops.softmax_channels(np.array([0.0, math.log(3.0)]).reshape(2, 1, 1))
        np.testing.assert_allclose(probs.ravel(), [0.25, 0.75], rtol=1e-14)

    def test_softmax_sums_and_vjp(self):
        """Channel sums equal one and the adjoint matches central differences"""
        rng = np.random.default_rng(7)
        scores = rng.standard_normal((5, 4, 4)) * 10
        probs = ops.softmax_channels(scores)
        self.assertLess(np.abs(probs.sum(axis=0) - 1).max(), 1e-12)
        weights = rng.standard_normal(scores.shape)
        grad = ops.softmax_channels_vjp(weights, probs)
        self.assertLess(max_gradient_error(
            lambda v: float((weights * ops.softmax_channels(v)).sum()), scores, grad), 1e-6)


class CrossEntropyTests(SimpleTestCase):
    """Test the masked cross entropy loss"""

    def test_uniform_scores_give_log_c(self):
        target = np.array([[0, 1], [2, 3]])
        self.assertAlmostEqual(ops.cross_entropy_masked(np.zeros((4, 2, 2)), target), math.log(4))

    def test_all_ignored_is_zero(self):
        """An empty mask gives loss 0 and zero gradients"""
        scores = np.random.default_rng(8).standard_normal((3, 2, 2))
        target = np.full((2, 2), 255)
        self.assertEqual(ops.cross_entropy_masked(scores, target, 255), 0.0)
        self.assertFalse(ops.cross_entropy_masked_vjp(scores, target, 255).any())

    def test_single_pixel_closed_form(self):
        scores = np.array([0.0, math.log(3.0)]).reshape(2, 1, 1)
        loss = ops.cross_entropy_masked(scores, np.array([[1]]))
        self.assertAlmostEqual(loss, -math.log(0.75), places=12)
        self.assertAlmostEqual(loss, 0.2877, places=4)

    def test_out_of_range_target_rejected(self):
        with self.assertRaises(LabelValueError):
            ops.cross_entropy_masked(np.zeros((2, 1, 2)), np.array([[0, 2]]))

    def test_vjp_matches_finite_differences(self):
        """Gradient of the masked mean matches central differences"""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            scores = rng.standard_normal((4, 4, 4))
            target = rng.integers(0, 4, (4, 4))
            target[rng.random((4, 4)) < 0.25] = 255
            grad = ops.cross_entropy_masked_vjp(scores, target, 255)
            result = check_vjp('cross_entropy_masked',
                               lambda v: ops.cross_entropy_masked(v, target, 255), scores, grad, 1e-6)
            self.assertTrue(result.passed, result)


class OptimizerTests(SimpleTestCase):
    """Test the poly learning rate and momentum SGD"""

    def test_poly_schedule(self):
        self.assertEqual(poly_lr(0.01, 0, 100), 0.01)
        self.assertAlmostEqual(poly_lr(0.01, 50, 100), 0.01 * 0.5 ** 0.9)
        self.assertAlmostEqual(poly_lr(0.01, 50, 100), 0.005359, places=6)
        with self.assertRaises(ValueError):
            poly_lr(0.01, 100, 100)

    def test_defaults(self):
        state = OptimizerState()
        self.assertEqual(state.momentum, 0.9)
        self.assertEqual(state.weight_decay, 1e-4)

    def test_two_steps_by_hand(self):
        """Momentum accumulates decayed gradients"""
        params = {'w': np.array([1.0])}
        state = OptimizerState(base_lr=0.1, total_iters=10, momentum=0.5, weight_decay=0.1)
        sgd_poly_step(params, {'w': np.array([2.0])}, state, 0)
        # v = 2 + 0.1 * 1 = 2.1 ; w = 1 - 0.1 * 2.1
        self.assertAlmostEqual(params['w'][0], 0.79)
        sgd_poly_step(params, {'w': np.array([2.0])}, state, 5)
        lr = 0.1 * 0.5 ** 0.9
        velocity = 0.5 * 2.1 + 2.0 + 0.1 * 0.79
        self.assertAlmostEqual(params['w'][0], 0.79 - lr * velocity)

    def test_frozen_parameters_untouched(self):
        params = {'beta': np.array([1.0]), 'w': np.array([1.0])}
        grads = {'beta': np.array([5.0]), 'w': np.array([5.0])}
        state = OptimizerState(frozen={'beta'})
        sgd_poly_step(params, grads, state, 0)
        self.assertEqual(params['beta'][0], 1.0)
        self.assertNotEqual(params['w'][0], 1.0)

    def test_init_is_seeded_and_bounded(self):
        a = init_uniform(np.random.default_rng(3), (8, 4), fan_in=4)
        b = init_uniform(np.random.default_rng(3), (8, 4), fan_in=4)
        self.assertTrue(np.array_equal(a, b))
        self.assertLessEqual(np.abs(a).max(), 0.5)
        self.assertEqual(a.dtype, np.float32)


class TensorFileTests(SimpleTestCase):
    """Test the portable BFPT tensor format"""

    def test_header_layout(self):
        payload = dumps_tensor(np.arange(6, dtype=np.float64).reshape(2, 3))
        self.assertEqual(payload[:4], b'BFPT')
        self.assertEqual(payload[4], 1)
        self.assertEqual(payload[5], 2)
        self.assertEqual(payload[6:14], (2).to_bytes(4, 'little') + (3).to_bytes(4, 'little'))
        self.assertEqual(len(payload), 14 + 6 * 8)

    def test_file_round_trip(self):
        array = np.random.default_rng(9).standard_normal((3, 4, 5)).astype(np.float32)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'x.bfpt'
            save_tensor(path, array)
            restored = load_tensor(path)
        self.assertEqual(restored.dtype, np.float32)
        self.assertTrue(np.array_equal(restored, array))

    def test_malformed_payloads_rejected(self):
        with self.assertRaises(TensorFormatError):
            loads_tensor(b'NOPE\x00\x01')
        with self.assertRaises(TensorFormatError):
            loads_tensor(dumps_tensor(np.zeros(4, dtype=np.float32))[:-1])
