import csv
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import skipUnless

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from boundary_labels.pgm import read_label_pgm, write_label_pgm
from boundary_labels.services import LabelMap, brute_force_boundary_oracle
from harness.regression import REGRESSION_DIR
from harness.storage import load_report
from scan_engine.benchmark import BENCH_COLUMNS

from .base import EXIT_IO, EXIT_USAGE, EXIT_VERIFICATION


def run(*args):
    out = StringIO()
    call_command(*args, stdout=out, stderr=StringIO())
    return out.getvalue()


def tiny_config(**training):
    values = {'steps': 2, 'total_iters': 2, 'trimap_bands': [2.0, 4.0], 'log_every': 1}
    values.update(training)
    return {
        'model': {'channels': 3, 'num_classes': 3, 'dilations': [1, 2], 'seed': 3},
        'training': values,
        'dataset': {'seed': 11, 'count': 2, 'size': 16},
    }


class GenLabelsCommandTests(SimpleTestCase):
    """Test the gen_labels command"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_uniform_map_unchanged(self):
        write_label_pgm(self.dir / 'in.pgm', np.zeros((10, 10), dtype=np.int64))
        output = run('gen_labels', '--in', str(self.dir / 'in.pgm'), '--out', str(self.dir / 'out.pgm'))
        np.testing.assert_array_equal(read_label_pgm(self.dir / 'out.pgm'), np.zeros((10, 10)))
        self.assertIn('Boundary fraction: 0.000000', output)
        self.assertIn('Resolved config:', output)
        self.assertIn('Seed: None', output)

    @override_settings(BFP_BOUNDARY_RADIUS=9.0)
    def test_default_radius_is_nine(self):
        """Columns within distance < 9 of the split at column 16 become class 2"""
        values = np.zeros((32, 32), dtype=np.int64)
        values[:, 16:] = 1
        write_label_pgm(self.dir / 'in.pgm', values)
        output = run('gen_labels', '--in', str(self.dir / 'in.pgm'), '--out', str(self.dir / 'out.pgm'))
        augmented = read_label_pgm(self.dir / 'out.pgm')
        expected = values.copy()
        expected[:, 8:24] = 2
        np.testing.assert_array_equal(augmented, expected)
        self.assertIn('"radius": 9.0', output)
        self.assertIn('Boundary fraction: 0.500000', output)

    def test_matches_brute_force_oracle_bytes(self):
        rng = np.random.default_rng(4)
        values = rng.integers(0, 3, (12, 12))
        values[rng.random((12, 12)) < 0.1] = 255
        values[0, :3] = [0, 1, 2]
        write_label_pgm(self.dir / 'in.pgm', values)
        run('gen_labels', '--in', str(self.dir / 'in.pgm'), '--out', str(self.dir / 'out.pgm'),
            '--radius', '2.5')
        oracle = brute_force_boundary_oracle(LabelMap.infer(values, ignore_value=255), 2.5)
        write_label_pgm(self.dir / 'oracle.pgm', oracle.values)
        self.assertEqual((self.dir / 'out.pgm').read_bytes(), (self.dir / 'oracle.pgm').read_bytes())

    def test_boundary_class_equal_to_ignore_rejected(self):
        values = np.zeros((4, 4), dtype=np.int64)
        values[:, 2:] = 254
        write_label_pgm(self.dir / 'in.pgm', values)
        with self.assertRaises(CommandError) as cm:
            run('gen_labels', '--in', str(self.dir / 'in.pgm'), '--out', str(self.dir / 'out.pgm'),
                '--radius', '2', '--ignore', '255')
        self.assertEqual(cm.exception.returncode, EXIT_IO)
        self.assertFalse((self.dir / 'out.pgm').exists())

    def test_wide_class_count_written_sixteen_bit(self):
        values = np.zeros((4, 4), dtype=np.int64)
        values[:, 2:] = 1
        write_label_pgm(self.dir / 'in.pgm', values)
        run('gen_labels', '--in', str(self.dir / 'in.pgm'), '--out', str(self.dir / 'out.pgm'),
            '--radius', '2', '--num-classes', '300', '--ignore', '65535')
        self.assertIn(b'65535', (self.dir / 'out.pgm').read_bytes()[:20])
        expected = values.copy()
        expected[:, 1:3] = 300
        np.testing.assert_array_equal(read_label_pgm(self.dir / 'out.pgm'), expected)

    def test_malformed_pgm_is_io_error(self):
        (self.dir / 'in.pgm').write_bytes(b'not a pgm at all')
        with self.assertRaises(CommandError) as cm:
            run('gen_labels', '--in', str(self.dir / 'in.pgm'), '--out', str(self.dir / 'out.pgm'))
        self.assertEqual(cm.exception.returncode, EXIT_IO)

    def test_missing_input_is_io_error(self):
        with self.assertRaises(CommandError) as cm:
            run('gen_labels', '--in', str(self.dir / 'absent.pgm'), '--out', str(self.dir / 'out.pgm'))
        self.assertEqual(cm.exception.returncode, EXIT_IO)

    def test_missing_required_flag_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('gen_labels', '--out', str(self.dir / 'out.pgm'))
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)

    def test_unknown_flag_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('gen_labels', '--in', 'a.pgm', '--out', 'b.pgm', '--bogus')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)

    def test_non_positive_radius_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('gen_labels', '--in', 'a.pgm', '--out', 'b.pgm', '--radius', '0')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)


class BenchCommandTests(SimpleTestCase):
    """Test the bench command"""

    def test_csv_rows_and_steps(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'bench.csv'
            output = run('bench', '--sizes', '6x4', '--channels', '2', '--threads', '1',
                         '--out', str(path))
            with open(path, newline='') as stream:
                rows = list(csv.DictReader(stream))
            first_line = path.read_text().splitlines()[0]
        self.assertEqual(first_line.split(','), list(BENCH_COLUMNS))
        self.assertIn('6x4: formula dag=96 uag=32', output)
        self.assertEqual([row['variant'] for row in rows], ['fcn', 'dag', 'uag'])
        steps = {row['variant']: int(row['sequential_steps']) for row in rows}
        self.assertEqual(steps, {'fcn': 0, 'dag': 96, 'uag': 32})
        self.assertTrue(all(row['resolution'] == '6x4' for row in rows))
        self.assertTrue(all(float(row['wall_clock_ms']) >= 0 for row in rows))
        self.assertIn('Wrote 3 rows', output)

    def test_published_sizes_note_loop_counts(self):
        from cli.management.commands.bench import loop_notes

        lines = loop_notes([(60, 45), (120, 90)])
        self.assertIn('60x45: formula dag=10800 uag=330; published loops dag=10800 uag=300', lines[1])
        self.assertIn('120x90: formula dag=43200 uag=660; published loops dag=43200 uag=600', lines[2])

    def test_bad_size_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('bench', '--sizes', '6by4', '--out', 'x.csv')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)


class InfluenceCommandTests(SimpleTestCase):
    """Test the influence command"""

    def test_uag_and_dag_agree_on_open_gate(self):
        output = run('influence', '--size', '8x8', '--probe', '7,7', '--variant', 'both')
        self.assertIn('EQUAL', output)
        self.assertIn('UAG receptive field of (7,7), 64 pixels:', output)
        self.assertIn('DAG receptive field of (7,7), 64 pixels:', output)

    def test_quadrant_follows_direction(self):
        output = run('influence', '--size', '4x4', '--probe', '1,2', '--variant', 'uag',
                     '--direction', 'se')
        grid = output.split('pixels:\n', 1)[1].splitlines()[:4]
        self.assertEqual(grid, ['###.', '##@.', '....', '....'])

    def test_closed_gate_reaches_only_the_probe(self):
        output = run('influence', '--size', '5x5', '--probe', '2,2', '--gate', 'closed',
                     '--direction', 'nw')
        self.assertIn('UAG receptive field of (2,2), 1 pixels:', output)
        self.assertIn('DAG receptive field of (2,2), 1 pixels:', output)
        self.assertIn('EQUAL', output)

    def test_probe_outside_grid_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('influence', '--size', '8x8', '--probe', '9,9')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)

    def test_unknown_direction_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('influence', '--direction', 'up')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)


class GradcheckCommandTests(SimpleTestCase):
    """Test the gradcheck command"""

    def test_selected_checks_pass(self):
        output = run('gradcheck', '--check', 'relu', '--check', 'fuse_four', '--seeds', '2')
        self.assertIn('All 2 gradient checks passed', output)
        self.assertIn('relu', output)

    def test_list_names_every_check(self):
        output = run('gradcheck', '--list')
        self.assertIn('scan S.E', output)
        self.assertIn('toy model (end to end)', output)

    def test_unknown_check_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('gradcheck', '--check', 'nonsense', '--seeds', '1')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)

    def test_all_and_check_are_exclusive(self):
        with self.assertRaises(CommandError) as cm:
            run('gradcheck', '--all', '--check', 'relu')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)


class TrainAndEvalCommandTests(SimpleTestCase):
    """Test train_toy and eval together"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, payload):
        path = self.dir / 'run.json'
        path.write_text(json.dumps(payload))
        return str(path)

    def test_zero_steps_writes_json_only(self):
        out = self.dir / 'run'
        output = run('train_toy', '--config', self.write_config(tiny_config(steps=0)), '--out', str(out))
        self.assertEqual(sorted(path.name for path in out.iterdir()), ['config.json', 'metrics.json'])
        report = load_report(out / 'metrics.json')
        self.assertEqual(report.steps, 0)
        self.assertEqual(report.loss_curve, [])
        self.assertIsNone(report.final_smoothed_loss)
        self.assertIn('"steps": 0', output)
        self.assertIn('Seed: 3', output)

    def test_train_then_eval_matches_pinned_metrics(self):
        out = self.dir / 'run'
        run('train_toy', '--config', self.write_config(tiny_config()), '--out', str(out), '--threads', '1')
        for name in ('config.json', 'metrics.json', 'loss_curve.csv', 'model', 'data'):
            self.assertTrue((out / name).exists(), name)
        self.assertEqual(len(load_report(out / 'metrics.json').loss_curve), 2)

        output = run('eval', '--model', str(out / 'model'), '--data', str(out / 'data'),
                     '--expect', str(out / 'metrics.json'), '--out', str(self.dir / 'eval.json'),
                     '--maps', str(self.dir / 'maps'))
        self.assertIn('EQUAL', output)
        self.assertIn('Wrote 4 confidence maps', output)
        gate = read_label_pgm(self.dir / 'maps' / 'scene_0001_gate.pgm')
        self.assertEqual(gate.shape, (16, 16))
        self.assertTrue(((gate >= 0) & (gate <= 255)).all())
        evaluated = json.loads((self.dir / 'eval.json').read_text())
        self.assertEqual(sorted(evaluated['trimap']), ['2', '4'])

    def test_eval_reports_differing_fields(self):
        out = self.dir / 'run'
        run('train_toy', '--config', self.write_config(tiny_config()), '--out', str(out))
        pinned = json.loads((out / 'metrics.json').read_text())
        pinned['miou'] = -1.0
        (self.dir / 'pinned.json').write_text(json.dumps(pinned))
        with self.assertRaises(CommandError) as cm:
            run('eval', '--model', str(out / 'model'), '--data', str(out / 'data'),
                '--expect', str(self.dir / 'pinned.json'))
        self.assertEqual(cm.exception.returncode, EXIT_VERIFICATION)

    def test_invalid_config_is_usage_error(self):
        config = self.write_config({'model': {'kernel_extent': 2}})
        with self.assertRaises(CommandError) as cm:
            run('train_toy', '--config', config, '--out', str(self.dir / 'run'))
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)

    def test_missing_config_file_is_io_error(self):
        with self.assertRaises(CommandError) as cm:
            run('train_toy', '--config', str(self.dir / 'absent.json'), '--out', str(self.dir / 'run'))
        self.assertEqual(cm.exception.returncode, EXIT_IO)



class PinRegressionCommandTests(SimpleTestCase):
    """Test recording and re-checking a regression pin"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.pin = self.dir / 'pin'

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, payload, name='run.json'):
        path = self.dir / name
        path.write_text(json.dumps(payload))
        return str(path)

    def test_record_then_match(self):
        config = self.write_config(tiny_config())
        first = run('pin_regression', '--config', config, '--out', str(self.pin))
        self.assertIn('Pinned 2-step run', first)
        for name in ('config.json', 'metrics.json', 'loss_curve.csv', 'model', 'data'):
            self.assertTrue((self.pin / name).exists(), name)
        second = run('pin_regression', '--config', config, '--out', str(self.pin), '--threads', '3')
        self.assertIn('EQUAL', second)

    def test_changed_loss_is_verification_failure(self):
        config = self.write_config(tiny_config())
        run('pin_regression', '--config', config, '--out', str(self.pin))
        pinned = json.loads((self.pin / 'metrics.json').read_text())
        pinned['final_smoothed_loss'] *= 2
        (self.pin / 'metrics.json').write_text(json.dumps(pinned))
        with self.assertRaises(CommandError) as cm:
            run('pin_regression', '--config', config, '--out', str(self.pin))
        self.assertEqual(cm.exception.returncode, EXIT_VERIFICATION)
        self.assertIn('final_smoothed_loss', str(cm.exception))

    def test_changed_config_is_verification_failure(self):
        run('pin_regression', '--config', self.write_config(tiny_config()), '--out', str(self.pin))
        changed = self.write_config(tiny_config(base_lr=0.02), name='changed.json')
        with self.assertRaises(CommandError) as cm:
            run('pin_regression', '--config', changed, '--out', str(self.pin))
        self.assertEqual(cm.exception.returncode, EXIT_VERIFICATION)
        output = run('pin_regression', '--config', changed, '--out', str(self.pin), '--update')
        self.assertIn('Pinned 2-step run', output)

    @skipUnless((REGRESSION_DIR / 'metrics.json').exists(), 'no checked-in regression pin')
    def test_eval_reproduces_checked_in_pin(self):
        output = run('eval', '--model', str(REGRESSION_DIR / 'model'),
                     '--data', str(REGRESSION_DIR / 'data'),
                     '--expect', str(REGRESSION_DIR / 'metrics.json'))
        self.assertIn('EQUAL', output)


class AblationCommandTests(SimpleTestCase):
    """Test the ablation command"""

    def test_tiny_grid(self):
        with tempfile.TemporaryDirectory() as directory:
            config = Path(directory) / 'base.json'
            config.write_text(json.dumps(tiny_config()))
            out = Path(directory) / 'table.json'
            output = run('ablation', '--config', str(config), '--variants', 'ungated,gated',
                         '--seeds', '1,2', '--out', str(out))
            table = json.loads(out.read_text())
        self.assertEqual([(row['variant'], row['seed']) for row in table['rows']],
                         [('ungated', 1), ('ungated', 2), ('gated', 1), ('gated', 2)])
        self.assertEqual([item['variant'] for item in table['aggregates']], ['ungated', 'gated'])
        self.assertEqual(set(table['trimap_gap']), {'2', '4'})
        self.assertIn('4 runs complete', output)

    def test_unknown_variant_is_usage_error(self):
        with self.assertRaises(CommandError) as cm:
            run('ablation', '--variants', 'gated,bogus', '--seeds', '1')
        self.assertEqual(cm.exception.returncode, EXIT_USAGE)
