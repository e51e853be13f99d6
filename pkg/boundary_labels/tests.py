import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings, strategies as st

from tensor_core.exceptions import LabelValueError, TensorFormatError

from .pgm import read_label_pgm, write_label_pgm
from .services import (
    LabelMap,
    boundary_fraction,
    brute_force_boundary_oracle,
    generate_boundary_labels,
    trimap_band_mask,
)


def split_map(height=4, width=4, split=2):
    values = np.zeros((height, width), dtype=np.int64)
    values[:, split:] = 1
    return LabelMap(values=values, num_classes=2)


def random_label_map(rng, max_side=32):
    """Blocky random map with a few ignore pixels sprinkled in."""
    height, width = rng.integers(1, max_side + 1, size=2)
    num_classes = int(rng.integers(1, 7))
    block = int(rng.integers(1, 6))
    coarse = rng.integers(0, num_classes, size=(height // block + 1, width // block + 1))
    values = np.kron(coarse, np.ones((block, block), dtype=np.int64))[:height, :width]
    values[rng.random(values.shape) < 0.05] = 255
    return LabelMap(values=values, num_classes=num_classes)


label_maps = st.integers(min_value=0, max_value=2 ** 32 - 1).map(
    lambda seed: random_label_map(np.random.default_rng(seed), max_side=16)
)


class BoundaryGenerationTests(SimpleTestCase):
    """Test boundary-class ground truth generation"""

    def test_uniform_map_unchanged(self):
        """A single-class map has no differing label and no boundary"""
        labels = LabelMap(values=np.full((5, 6), 3), num_classes=4)
        augmented = generate_boundary_labels(labels, radius=9)
        np.testing.assert_array_equal(augmented.values, labels.values)
        self.assertEqual(augmented.num_classes, 5)
        self.assertEqual(boundary_fraction(augmented), 0.0)

    def test_split_map_radius_two(self):
        """Columns one step from the split become boundary, columns two steps away do not"""
        augmented = generate_boundary_labels(split_map(), radius=2)
        np.testing.assert_array_equal(augmented.values[:, 1], [2, 2, 2, 2])
        np.testing.assert_array_equal(augmented.values[:, 2], [2, 2, 2, 2])
        np.testing.assert_array_equal(augmented.values[:, 0], [0, 0, 0, 0])
        np.testing.assert_array_equal(augmented.values[:, 3], [1, 1, 1, 1])
        self.assertEqual(boundary_fraction(augmented), 0.5)

    def test_default_radius_is_nine(self):
        """Without an explicit radius the 9 px rule applies"""
        labels = split_map(height=2, width=40, split=20)
        augmented = generate_boundary_labels(labels)
        boundary_columns = np.nonzero(augmented.values[0] == 2)[0]
        np.testing.assert_array_equal(boundary_columns, np.arange(12, 28))

    def test_ignore_pixels_neither_relabelled_nor_sources(self):
        values = np.array([[0, 255, 0], [0, 0, 0]])
        augmented = generate_boundary_labels(LabelMap(values=values, num_classes=1), radius=5)
        np.testing.assert_array_equal(augmented.values, values)

    def test_all_ignore_map_returned_unchanged(self):
        values = np.full((3, 3), 255)
        augmented = generate_boundary_labels(LabelMap(values=values, num_classes=2), radius=3)
        np.testing.assert_array_equal(augmented.values, values)

    def test_out_of_range_label_rejected(self):
        with self.assertRaises(LabelValueError):
            LabelMap(values=np.array([[0, 3]]), num_classes=3)

    def test_boundary_class_colliding_with_ignore_rejected(self):
        """With 255 classes and ignore 255 the boundary class would read as ignore"""
        values = np.zeros((4, 4), dtype=np.int64)
        values[:, 2:] = 254
        labels = LabelMap.infer(values, ignore_value=255)
        self.assertEqual(labels.num_classes, 255)
        with self.assertRaises(LabelValueError):
            generate_boundary_labels(labels, radius=2)
        with self.assertRaises(LabelValueError):
            brute_force_boundary_oracle(labels, radius=2)

    def test_boundary_class_past_byte_range(self):
        """Class counts past a byte still get their own boundary class"""
        values = np.zeros((4, 4), dtype=np.int64)
        values[:, 2:] = 255
        augmented = generate_boundary_labels(LabelMap(values=values, num_classes=256, ignore_value=65535),
                                             radius=2)
        self.assertEqual(augmented.num_classes, 257)
        self.assertEqual(boundary_fraction(augmented), 0.5)

    def test_fast_path_matches_oracle_on_random_maps(self):
        """The distance-transform path equals the all-pairs oracle exactly"""
        for seed in range(200):
            rng = np.random.default_rng(seed)
            labels = random_label_map(rng)
            if seed % 3 == 0:
                radius = math.sqrt(int(rng.integers(1, 30)))
            else:
                radius = float(rng.uniform(0.5, 8.0))
            fast = generate_boundary_labels(labels, radius=radius)
            oracle = brute_force_boundary_oracle(labels, radius)
            self.assertTrue(np.array_equal(fast.values, oracle.values), f"seed {seed}")

    def test_oracle_examples(self):
        """The oracle reproduces the worked examples"""
        np.testing.assert_array_equal(
            brute_force_boundary_oracle(split_map(), 2).values,
            generate_boundary_labels(split_map(), radius=2).values,
        )
        uniform = LabelMap(values=np.zeros((3, 3), dtype=np.int64), num_classes=1)
        np.testing.assert_array_equal(brute_force_boundary_oracle(uniform, 4).values, uniform.values)

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(labels=label_maps, seed=st.integers(min_value=0, max_value=1000))
    def test_class_permutation_invariance(self, labels, seed):
        """Permuting classes permutes kept labels and leaves the boundary set alone"""
        permutation = np.random.default_rng(seed).permutation(labels.num_classes)
        valid = labels.valid_mask
        permuted_values = labels.values.copy()
        permuted_values[valid] = permutation[labels.values[valid]]
        permuted = LabelMap(values=permuted_values, num_classes=labels.num_classes)
        original = generate_boundary_labels(labels, radius=2.5)
        shuffled = generate_boundary_labels(permuted, radius=2.5)
        boundary = original.values == labels.num_classes
        np.testing.assert_array_equal(boundary, shuffled.values == labels.num_classes)
        kept = valid & ~boundary
        np.testing.assert_array_equal(shuffled.values[kept], permutation[original.values[kept]])

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(labels=label_maps, small=st.floats(0.5, 4.0), extra=st.floats(0.01, 4.0))
    def test_radius_monotonicity(self, labels, small, extra):
        """A larger radius never shrinks the boundary set"""
        inner = generate_boundary_labels(labels, radius=small).values == labels.num_classes
        outer = generate_boundary_labels(labels, radius=small + extra).values == labels.num_classes
        self.assertFalse((inner & ~outer).any())


class TrimapBandTests(SimpleTestCase):
    """Test near-boundary evaluation bands"""

    def test_band_beyond_diagonal_covers_everything(self):
        labels = split_map(height=6, width=8, split=3)
        self.assertTrue(trimap_band_mask(labels, math.hypot(6, 8)).all())

    def test_uniform_map_has_empty_band(self):
        labels = LabelMap(values=np.ones((4, 4), dtype=np.int64), num_classes=2)
        self.assertFalse(trimap_band_mask(labels, 3).any())

    def test_narrow_band_hugs_the_split(self):
        mask = trimap_band_mask(split_map(height=5, width=8, split=4), 1.5)
        expected = np.zeros((5, 8), dtype=bool)
        expected[:, 3:5] = True
        np.testing.assert_array_equal(mask, expected)

    def test_non_positive_band_rejected(self):
        with self.assertRaises(ValueError):
            trimap_band_mask(split_map(), 0)


class LabelPgmTests(SimpleTestCase):
    """Test PGM label map I/O"""

    def test_eight_bit_round_trip(self):
        values = np.array([[0, 1, 2], [255, 4, 5]])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'labels.pgm'
            write_label_pgm(path, values)
            payload = path.read_bytes()
            restored = read_label_pgm(path)
        self.assertTrue(payload.startswith(b'P5'))
        self.assertEqual(len(payload.split(b'\n', 3)[3]), 6)
        np.testing.assert_array_equal(restored, values)

    def test_sixteen_bit_round_trip(self):
        values = np.array([[0, 300], [65535, 7]])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'wide.pgm'
            write_label_pgm(path, values)
            payload = path.read_bytes()
            restored = read_label_pgm(path)
        self.assertIn(b'65535', payload[:20])
        np.testing.assert_array_equal(restored, values)

    def test_class_count_selects_sixteen_bit(self):
        """Small values still go 16-bit once the class range exceeds a byte"""
        values = np.array([[0, 1], [2, 3]])
        with tempfile.TemporaryDirectory() as tmp:
            narrow, wide = Path(tmp) / 'narrow.pgm', Path(tmp) / 'wide.pgm'
            write_label_pgm(narrow, values, num_classes=255)
            write_label_pgm(wide, values, num_classes=256)
            narrow_header, wide_header = narrow.read_bytes()[:20], wide.read_bytes()[:20]
            restored = read_label_pgm(wide)
        self.assertIn(b'255', narrow_header)
        self.assertNotIn(b'65535', narrow_header)
        self.assertIn(b'65535', wide_header)
        np.testing.assert_array_equal(restored, values)

    def test_malformed_file_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'broken.pgm'
            path.write_bytes(b'P5\n4 4\n255\n\x00\x01')
            with self.assertRaises(TensorFormatError):
                read_label_pgm(path)
            with self.assertRaises(TensorFormatError):
                read_label_pgm(Path(tmp) / 'missing.pgm')
