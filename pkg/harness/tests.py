import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, tag
from rest_framework.exceptions import ValidationError

from boundary_labels.services import LabelMap, generate_boundary_labels
from tensor_core.exceptions import DivergenceError, MissingStateError, ShapeMismatchError, TensorFormatError

from .ablation import ablation_grid
from .config import (
    VARIANT_BETA_FROZEN,
    VARIANT_FCN,
    VARIANT_GATED,
    VARIANT_UNGATED,
    DatasetConfig,
    ModelConfig,
    RunConfig,
    TrainingConfig,
)
from .dataset import export_scenes, load_scenes, synth_dataset
from .gradients import END_TO_END_TOLERANCE, end_to_end_gradient_error
from .metrics import (
    MetricsReport,
    compare_metrics,
    compare_reports,
    evaluate_miou,
    evaluate_model,
    evaluate_trimap,
)
from .model import ToyBfpNet, build_model, expected_parameter_count
from .regression import REGRESSION_DIR, load_pin, regression_config, run_scenes
from .serializers import build_model_config, build_run_config, build_training_config
from .storage import load_model, load_report, read_loss_curve, save_model, save_report, write_loss_curve
from .training import augment, smoothed_losses, train


def tiny_model_config(**overrides):
    values = dict(channels=3, num_classes=3, depth=2, dilations=[1, 2], seed=3)
    values.update(overrides)
    return ModelConfig(**values)


def tiny_training_config(**overrides):
    values = dict(steps=3, total_iters=3, trimap_bands=[2.0, 4.0], log_every=1)
    values.update(overrides)
    return TrainingConfig(**values)


def tiny_run_config(model=None, training=None):
    return RunConfig(
        model=model or tiny_model_config(),
        training=training or tiny_training_config(steps=2, total_iters=2),
        dataset=DatasetConfig(seed=11, count=2, size=16),
    )


def split_map(size=16, column=8):
    values = np.zeros((size, size), dtype=np.int64)
    values[:, column:] = 1
    return LabelMap(values=values, num_classes=2)


class SynthDatasetTests(SimpleTestCase):
    """Test the synthetic scene generator"""

    def test_same_seed_same_scenes(self):
        first = synth_dataset(5, 3, size=32)
        second = synth_dataset(5, 3, size=32)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.image, b.image)
            np.testing.assert_array_equal(a.labels.values, b.labels.values)

    def test_count_zero(self):
        self.assertEqual(synth_dataset(5, 0), [])

    def test_needs_two_classes(self):
        with self.assertRaises(ValueError):
            synth_dataset(5, 1, num_classes=1)

    def test_tiny_canvas_is_background_only(self):
        """A canvas too small for any shape yields a valid background-only scene"""
        scene = synth_dataset(5, 1, size=6)[0]
        self.assertEqual(scene.shapes, [])
        self.assertFalse(scene.labels.values.any())
        self.assertEqual(scene.image.shape, (3, 6, 6))

    def test_single_rectangle_histogram(self):
        """One rectangle with two classes paints exactly its inclusive box"""
        scene = synth_dataset(9, 1, size=32, num_classes=2, max_shapes=1, kinds=('rectangle',))[0]
        self.assertEqual(len(scene.shapes), 1)
        x0, y0, x1, y1 = scene.shapes[0].box
        self.assertEqual(set(np.unique(scene.labels.values)), {0, 1})
        self.assertEqual(int((scene.labels.values == 1).sum()), (x1 - x0 + 1) * (y1 - y0 + 1))

    def test_image_range_and_layout(self):
        scene = synth_dataset(2, 1, size=24)[0]
        self.assertEqual(scene.image.dtype, np.float32)
        self.assertGreaterEqual(scene.image.min(), 0.0)
        self.assertLessEqual(scene.image.max(), 1.0)
        self.assertEqual(scene.size, (24, 24))

    def test_export_and_load(self):
        scenes = synth_dataset(4, 2, size=16)
        with tempfile.TemporaryDirectory() as directory:
            export_scenes(scenes, directory)
            loaded = load_scenes(directory)
        self.assertEqual(len(loaded), 2)
        for original, restored in zip(scenes, loaded):
            np.testing.assert_array_equal(original.image, restored.image)
            np.testing.assert_array_equal(original.labels.values, restored.labels.values)
            self.assertEqual(restored.labels.num_classes, original.labels.num_classes)

    def test_malformed_manifest(self):
        with tempfile.TemporaryDirectory() as directory:
            Path(directory, 'manifest.json').write_text('{not json')
            with self.assertRaises(TensorFormatError):
                load_scenes(directory)


class ModelTests(SimpleTestCase):
    """Test the toy network wiring"""

    def test_head_shapes(self):
        """3x64x64 input gives N and N+1 score maps"""
        model = build_model(tiny_model_config(num_classes=4))
        cache = model.forward(np.zeros((3, 64, 64), dtype=np.float32))
        self.assertEqual(cache.class_scores.shape, (4, 64, 64))
        self.assertEqual(cache.boundary_scores.shape, (5, 64, 64))
        self.assertEqual(model.predict(np.zeros((3, 64, 64), dtype=np.float32)).shape, (64, 64))

    def test_zero_beta_matches_ungated(self):
        """beta = 0 reproduces the ungated model bit for bit"""
        image = synth_dataset(1, 1, size=16)[0].image
        gated = ToyBfpNet(tiny_model_config(variant=VARIANT_GATED, beta=0.0))
        ungated = ToyBfpNet(tiny_model_config(variant=VARIANT_UNGATED))
        np.testing.assert_array_equal(gated.forward(image).class_scores, ungated.forward(image).class_scores)

    def test_parameter_count_closed_form(self):
        for config in (tiny_model_config(), ModelConfig(), tiny_model_config(kernel_extent=3, channels=5)):
            self.assertEqual(ToyBfpNet(config).parameter_count, expected_parameter_count(config))

    def test_variants_share_initial_weights(self):
        gated = ToyBfpNet(tiny_model_config(variant=VARIANT_GATED))
        fcn = ToyBfpNet(tiny_model_config(variant=VARIANT_FCN))
        for name, value in gated.params.items():
            np.testing.assert_array_equal(value, fcn.params[name])

    def test_inconsistent_config_rejected(self):
        with self.assertRaises(ShapeMismatchError):
            ToyBfpNet(tiny_model_config(depth=3))
        with self.assertRaises(ShapeMismatchError):
            ToyBfpNet(tiny_model_config(kernel_extent=2))
        with self.assertRaises(ShapeMismatchError):
            ToyBfpNet(tiny_model_config()).forward(np.zeros((1, 8, 8)))

    def test_backward_without_forward(self):
        model = ToyBfpNet(tiny_model_config())
        labels = LabelMap(values=np.zeros((4, 4), dtype=np.int64), num_classes=3)
        with self.assertRaises(MissingStateError):
            model.backward(None, labels, labels)

    def _grads(self, **overrides):
        scene = synth_dataset(6, 1, size=16)[0]
        model = ToyBfpNet(tiny_model_config(**overrides))
        boundary = generate_boundary_labels(scene.labels, model.config.boundary_radius)
        return model.loss_and_grads(scene.image, scene.labels, boundary)[1]

    def test_zero_loss_weight_silences_boundary_head(self):
        """With lambda = 0 and no gate the boundary head gets no gradient"""
        for variant in (VARIANT_UNGATED, VARIANT_FCN):
            grads = self._grads(variant=variant, loss_weight=0.0)
            self.assertFalse(grads['boundary_head.weight'].any())
            self.assertFalse(grads['boundary_head.bias'].any())

    def test_gate_path_still_trains_boundary_head(self):
        grads = self._grads(variant=VARIANT_GATED, loss_weight=0.0)
        self.assertTrue(grads['boundary_head.weight'].any())
        self.assertNotEqual(float(grads['gate.beta'][0]), 0.0)

    def test_stop_gradient_blocks_gate_path(self):
        grads = self._grads(variant=VARIANT_GATED, loss_weight=0.0, stop_gradient=True)
        self.assertFalse(grads['boundary_head.weight'].any())
        self.assertNotEqual(float(grads['gate.beta'][0]), 0.0)

    def test_end_to_end_gradients(self):
        """Eight random parameter entries match central differences in double precision"""
        for seed in (0, 100, 200):
            error, _ = end_to_end_gradient_error(seed)
            self.assertLess(error, END_TO_END_TOLERANCE)

    def test_ungated_first_stage_gradients(self):
        error, _ = end_to_end_gradient_error(300, variant='first-stage-ungated')
        self.assertLess(error, END_TO_END_TOLERANCE)


class MiouTests(SimpleTestCase):
    """Test IoU bookkeeping"""

    def test_perfect_prediction(self):
        gt = split_map()
        result = evaluate_miou(gt, gt, 2)
        self.assertEqual(result.miou, 1.0)
        self.assertEqual(result.per_class, [1.0, 1.0])

    def test_half_split(self):
        """All-background prediction on a half split gives IoU (0.5, 0)"""
        gt = split_map(4, 2)
        result = evaluate_miou(np.zeros((4, 4), dtype=np.int64), gt, 2)
        self.assertEqual(result.per_class, [0.5, 0.0])
        self.assertEqual(result.miou, 0.25)

    def test_mask_restricts_region(self):
        gt = split_map(4, 2)
        result = evaluate_miou(np.zeros((4, 4), dtype=np.int64), gt, 2, mask=gt.values == 0)
        self.assertEqual(result.per_class, [1.0, None])
        self.assertEqual(result.miou, 1.0)

    def test_empty_region_is_undefined(self):
        gt = LabelMap(values=np.full((3, 3), 255), num_classes=2)
        result = evaluate_miou(np.zeros((3, 3), dtype=np.int64), gt, 2)
        self.assertIsNone(result.miou)
        self.assertEqual(result.per_class, [None, None])

    def test_ignore_pixels_excluded(self):
        values = np.array([[0, 1], [255, 255]])
        gt = LabelMap(values=values, num_classes=2)
        result = evaluate_miou(np.array([[0, 1], [1, 0]]), gt, 2)
        self.assertEqual(result.miou, 1.0)
        self.assertEqual(result.pixels, 2)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            evaluate_miou(np.zeros((2, 3), dtype=np.int64), split_map(4, 2), 2)

    def test_permutation_equivariance(self):
        """Relabelling classes permutes per-class IoU and keeps mIoU"""
        rng = np.random.default_rng(8)
        gt = rng.integers(0, 4, (12, 12))
        pred = rng.integers(0, 4, (12, 12))
        permutation = np.array([2, 0, 3, 1])
        base = evaluate_miou(pred, gt, 4)
        permuted = evaluate_miou(permutation[pred], permutation[gt], 4)
        for label in range(4):
            self.assertEqual(permuted.per_class[permutation[label]], base.per_class[label])
        self.assertAlmostEqual(permuted.miou, base.miou, places=12)

    def test_unit_miou_only_for_exact_match(self):
        gt = split_map()
        pred = gt.values.copy()
        pred[0, 0] = 1
        self.assertLess(evaluate_miou(pred, gt, 2).miou, 1.0)


class TrimapTests(SimpleTestCase):
    """Test band-restricted mIoU"""

    def test_perfect_prediction_every_band(self):
        gt = split_map()
        self.assertEqual(evaluate_trimap(gt, gt, [1.5, 4.0, 8.0]), {1.5: 1.0, 4.0: 1.0, 8.0: 1.0})

    def test_wide_band_equals_unmasked(self):
        gt = split_map()
        pred = np.random.default_rng(2).integers(0, 2, (16, 16))
        self.assertEqual(evaluate_trimap(pred, gt, [100.0])[100.0], evaluate_miou(pred, gt, 2).miou)

    def test_boundary_error_hurts_narrow_band_more(self):
        """A one-column error along the boundary: band 1.5 gives 0.25, band 8 gives (7/8 + 6/7) / 2"""
        gt = split_map()
        pred = gt.values.copy()
        pred[:, 8] = 0
        bands = evaluate_trimap(pred, gt, [1.5, 8.0])
        self.assertEqual(bands[1.5], 0.25)
        self.assertAlmostEqual(bands[8.0], (7 / 8 + 6 / 7) / 2, places=12)
        self.assertLess(bands[1.5], bands[8.0])

    def test_bands_must_ascend(self):
        gt = split_map()
        with self.assertRaises(ValueError):
            evaluate_trimap(gt, gt, [4.0, 2.0])
        with self.assertRaises(ValueError):
            evaluate_trimap(gt, gt, [0.0, 2.0])


class AugmentTests(SimpleTestCase):
    """Test flip, resize and crop/pad"""

    def setUp(self):
        self.scene = synth_dataset(3, 1, size=16)[0]

    def test_flip_at_unit_scale(self):
        config = TrainingConfig(flip_probability=1.0, scale_min=1.0, scale_max=1.0)
        image, labels = augment(self.scene.image, self.scene.labels, config, np.random.default_rng(0))
        np.testing.assert_array_equal(image, self.scene.image[:, :, ::-1])
        np.testing.assert_array_equal(labels.values, self.scene.labels.values[:, ::-1])

    def test_shrink_pads_with_ignore(self):
        config = TrainingConfig(flip_probability=0.0, scale_min=0.5, scale_max=0.5)
        image, labels = augment(self.scene.image, self.scene.labels, config, np.random.default_rng(0))
        self.assertEqual(image.shape, (3, 16, 16))
        self.assertTrue((labels.values[8:, :] == 255).all())
        self.assertTrue((labels.values[:, 8:] == 255).all())
        self.assertFalse((labels.values[:8, :8] == 255).any())

    def test_crop_size(self):
        config = TrainingConfig(scale_min=2.0, scale_max=2.0, crop_size=8)
        image, labels = augment(self.scene.image, self.scene.labels, config, np.random.default_rng(1))
        self.assertEqual(image.shape, (3, 8, 8))
        self.assertEqual(labels.shape, (8, 8))

    def test_seeded(self):
        config = TrainingConfig()
        first = augment(self.scene.image, self.scene.labels, config, np.random.default_rng(4))
        second = augment(self.scene.image, self.scene.labels, config, np.random.default_rng(4))
        np.testing.assert_array_equal(first[0], second[0])
        np.testing.assert_array_equal(first[1].values, second[1].values)


class TrainingTests(SimpleTestCase):
    """Test the training loop"""

    def setUp(self):
        self.scenes = synth_dataset(11, 2, size=16, num_classes=3)

    def test_zero_steps_reports_initial_metrics(self):
        report = train(build_model(tiny_model_config()), self.scenes, tiny_training_config(steps=0))
        self.assertEqual(report.loss_curve, [])
        self.assertIsNone(report.final_smoothed_loss)
        self.assertIsNotNone(report.initial_loss)
        self.assertIsNotNone(report.miou)
        self.assertEqual(report.steps, 0)

    def test_steps_beyond_schedule_rejected(self):
        with self.assertRaises(ValueError):
            train(build_model(tiny_model_config()), self.scenes, tiny_training_config(steps=4))

    def test_loss_curve_recorded_per_step(self):
        report = train(build_model(tiny_model_config()), self.scenes, tiny_training_config())
        self.assertEqual(len(report.loss_curve), 3)
        self.assertTrue(np.isfinite(report.loss_curve).all())
        self.assertEqual(set(report.trimap), {'2', '4'})

    def test_deterministic_across_runs_and_threads(self):
        """Same config and seed give the same report and weights for 1 and 3 threads"""
        models, reports = [], []
        for threads in (1, 1, 3):
            model = build_model(tiny_model_config())
            reports.append(train(model, self.scenes, tiny_training_config(threads=threads)))
            models.append(model)
        self.assertEqual(reports[0].as_dict(), reports[1].as_dict())
        self.assertEqual(reports[0].as_dict(), reports[2].as_dict())
        for name, value in models[0].params.items():
            np.testing.assert_array_equal(value, models[2].params[name])

    def test_divergence_names_step(self):
        model = build_model(tiny_model_config())
        with mock.patch.object(model, 'loss_and_grads', return_value=(float('nan'), {})):
            with self.assertRaises(DivergenceError) as caught:
                train(model, self.scenes, tiny_training_config())
        self.assertEqual(caught.exception.step, 0)

    def test_beta_frozen_keeps_beta(self):
        model = build_model(tiny_model_config(variant=VARIANT_BETA_FROZEN, beta=0.7))
        train(model, self.scenes, tiny_training_config())
        self.assertEqual(float(model.params['gate.beta'][0]), np.float32(0.7))

    def test_beta_clamped_into_unit_interval(self):
        model = build_model(tiny_model_config())
        model.params['gate.beta'][0] = 3.0
        model.clamp_beta()
        self.assertEqual(float(model.params['gate.beta'][0]), 1.0)
        model.params['gate.beta'][0] = -0.5
        model.clamp_beta()
        self.assertEqual(float(model.params['gate.beta'][0]), 0.0)

    def test_smoothed_losses(self):
        self.assertEqual(smoothed_losses([1.0, 2.0, 3.0, 4.0], 2), [1.0, 1.5, 2.5, 3.5])
        self.assertEqual(smoothed_losses([], 50), [])

    def test_evaluate_model_ranges(self):
        metrics = evaluate_model(build_model(tiny_model_config()), self.scenes, [2.0])
        self.assertEqual(len(metrics['per_class_iou']), 3)
        self.assertTrue(0.0 <= metrics['miou'] <= 1.0)
        self.assertTrue(0.0 <= metrics['pixel_accuracy'] <= 1.0)
        self.assertTrue(0.0 <= metrics['boundary_confidence_on_boundary'] <= 1.0)


@tag('slow')
class RegressionRunTests(SimpleTestCase):
    """Test the 2000-step seed-7 default run against the checked-in pin"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = regression_config()
        cls.report = train(build_model(config.model), run_scenes(config), config.training)
        cls.pinned = load_pin()

    def test_default_run_halves_loss(self):
        self.assertEqual(self.report.steps, 2000)
        self.assertLess(self.report.final_smoothed_loss, 0.5 * self.report.initial_loss)

    def test_boundary_head_separates_boundaries(self):
        self.assertGreater(self.report.boundary_confidence_on_boundary,
                           self.report.boundary_confidence_off_boundary)

    def test_matches_pinned_report_exactly(self):
        if self.pinned is None:
            self.skipTest(f"no regression pin under {REGRESSION_DIR}; record one with pin_regression")
        self.assertEqual(self.report.final_smoothed_loss, self.pinned.final_smoothed_loss)
        self.assertEqual(self.report.initial_loss, self.pinned.initial_loss)
        self.assertEqual(self.report.miou, self.pinned.miou)
        self.assertEqual(compare_reports(self.report, self.pinned), [])


class StorageTests(SimpleTestCase):
    """Test model, report and loss-curve files"""

    def test_model_round_trip(self):
        model = build_model(tiny_model_config(variant=VARIANT_BETA_FROZEN))
        image = synth_dataset(1, 1, size=16)[0].image
        with tempfile.TemporaryDirectory() as directory:
            save_model(model, directory)
            restored = load_model(directory)
        self.assertEqual(restored.config, model.config)
        np.testing.assert_array_equal(restored.forward(image).class_scores, model.forward(image).class_scores)

    def test_missing_model(self):
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(FileNotFoundError):
                load_model(directory)

    def test_report_round_trip(self):
        report = MetricsReport(
            variant='gated', seed=7, steps=2, num_classes=2, per_class_iou=[0.5, None],
            miou=0.5, trimap={'2': 0.25}, initial_loss=1.25, final_smoothed_loss=0.5,
            loss_curve=[1.0, 0.1],
        )
        with tempfile.TemporaryDirectory() as directory:
            path = save_report(report, Path(directory) / 'metrics.json')
            self.assertEqual(load_report(path), report)

    def test_loss_curve_csv(self):
        curve = [1.5, 0.25, 0.125]
        with tempfile.TemporaryDirectory() as directory:
            path = write_loss_curve(curve, smoothed_losses(curve, 2), Path(directory) / 'loss.csv')
            np.testing.assert_array_equal(read_loss_curve(path), curve)


class ConfigSerializerTests(SimpleTestCase):
    """Test config validation and defaulting"""

    def test_full_defaults(self):
        config = build_run_config()
        self.assertEqual(config.model, ModelConfig())
        self.assertEqual(config.training, TrainingConfig())
        self.assertEqual(config.dataset, DatasetConfig())

    def test_depth_follows_dilations(self):
        self.assertEqual(build_model_config({'dilations': [1, 2, 4]}).depth, 3)
        with self.assertRaises(ValidationError):
            build_model_config({'dilations': [1, 2], 'depth': 3})

    def test_unknown_key_rejected(self):
        with self.assertRaises(ValidationError):
            build_model_config({'chanels': 4})
        with self.assertRaises(ValidationError):
            build_run_config({'model': {}, 'extra': {}})

    def test_even_kernel_rejected(self):
        with self.assertRaises(ValidationError):
            build_model_config({'kernel_extent': 2})

    def test_schedule_bounds(self):
        self.assertEqual(build_training_config({'steps': 5, 'total_iters': 5}).steps, 5)
        with self.assertRaises(ValidationError):
            build_training_config({'steps': 6, 'total_iters': 5})
        with self.assertRaises(ValidationError):
            build_training_config({'trimap_bands': [4.0, 2.0]})


class AblationTests(SimpleTestCase):
    """Test the ablation grid"""

    def test_rows_and_aggregates(self):
        """3 seeds x 2 variants give 6 rows and 2 aggregates"""
        table = ablation_grid(tiny_run_config(), [VARIANT_UNGATED, VARIANT_GATED], [1, 2, 3])
        self.assertEqual(len(table.rows), 6)
        self.assertEqual([item.variant for item in table.aggregates], [VARIANT_UNGATED, VARIANT_GATED])
        self.assertEqual(table.aggregates[0].seeds, [1, 2, 3])
        self.assertEqual(set(table.as_dict()['trimap_gap']), {'2', '4'})

    def test_duplicate_variant_identical_rows(self):
        table = ablation_grid(tiny_run_config(), [VARIANT_GATED, VARIANT_GATED], [5])
        self.assertEqual(table.rows[0].report.as_dict(), table.rows[1].report.as_dict())
        self.assertEqual(len(table.aggregates), 1)
        self.assertEqual(table.aggregates[0].spread['miou'], 0.0)

    def test_ungated_matches_zero_beta(self):
        """The ungated row equals the gated row with beta held at zero"""
        base = tiny_run_config(model=tiny_model_config(beta=0.0))
        table = ablation_grid(base, [VARIANT_UNGATED, VARIANT_BETA_FROZEN], [5])
        first, second = (row.report.as_dict() for row in table.rows)
        first.pop('variant')
        second.pop('variant')
        self.assertEqual(first, second)

    def test_unknown_variant(self):
        with self.assertRaises(ValueError):
            ablation_grid(tiny_run_config(), ['crf'], [1])

    def test_seed_changes_rows(self):
        table = ablation_grid(
            tiny_run_config(training=tiny_training_config(steps=1, total_iters=1)),
            [VARIANT_GATED], [1, 2],
        )
        self.assertNotEqual(table.rows[0].report.loss_curve, table.rows[1].report.loss_curve)


class CompareReportsTests(SimpleTestCase):
    """Test comparison against pinned metrics reports"""

    def pinned(self):
        return MetricsReport(variant='gated', seed=1, steps=2, num_classes=2,
                             per_class_iou=[0.5, None], miou=0.5, boundary_iou=None,
                             pixel_accuracy=0.75, trimap={'2': 0.25},
                             initial_loss=1.5, final_smoothed_loss=0.75)

    def test_none_only_matches_none(self):
        metrics = {
            'per_class_iou': [0.5, None], 'miou': 0.5, 'pixel_accuracy': 0.75, 'boundary_iou': None,
            'boundary_confidence_on_boundary': None, 'boundary_confidence_off_boundary': None,
            'trimap': {'2': 0.25},
        }
        self.assertEqual(compare_metrics(metrics, self.pinned()), [])
        metrics['boundary_iou'] = 0.0
        metrics['trimap'] = {}
        self.assertEqual(compare_metrics(metrics, self.pinned()), ['boundary_iou', 'trimap[2]'])

    def test_training_fields_compared_exactly(self):
        report = self.pinned()
        self.assertEqual(compare_reports(report, self.pinned()), [])
        report.final_smoothed_loss = 0.75 + 1e-12
        self.assertEqual(compare_reports(report, self.pinned()), ['final_smoothed_loss'])
        self.assertEqual(compare_reports(report, self.pinned(), tolerance=1e-9), [])

    def test_regression_config_is_the_default_run(self):
        self.assertEqual(regression_config(), build_run_config())
        self.assertEqual(regression_config().training.steps, 2000)

    def test_missing_pin_is_none(self):
        with tempfile.TemporaryDirectory() as directory:
            self.assertIsNone(load_pin(directory))
