from pathlib import Path

from cli.base import BfpCommand, float_list, positive_int
from confidence.services import confidence_to_pgm
from harness.dataset import load_scenes
from harness.metrics import compare_metrics, evaluate_model
from harness.storage import load_model, load_report, write_json

DEFAULT_BANDS = [2.0, 4.0, 8.0]


def write_confidence_maps(model, scenes, directory):
    """Boundary confidence per scene, plus the propagation gate for gated variants."""
    directory = Path(directory)
    written = 0
    for index, scene in enumerate(scenes):
        cache = model.forward(scene.image)
        stem = f"scene_{index:04d}"
        confidence_to_pgm(cache.boundary_probs[-1], directory / f"{stem}_boundary.pgm")
        written += 1
        if cache.gate is not None:
            confidence_to_pgm(cache.gate, directory / f"{stem}_gate.pgm")
            written += 1
    return written


class Command(BfpCommand):
    help = 'Evaluate a saved model on an exported scene directory'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Directory written by train_toy (model/)')
        parser.add_argument('--data', required=True, help='Scene directory written by train_toy (data/)')
        parser.add_argument('--bands', type=float_list, default=None,
                            help='Trimap band widths (default 2,4,8 or those of --expect)')
        parser.add_argument('--out', default=None, help='Write the metrics as JSON')
        parser.add_argument('--expect', default=None, help='Pinned metrics.json to compare against')
        parser.add_argument('--tolerance', type=float, default=0.0,
                            help='Absolute tolerance for --expect (default exact)')
        parser.add_argument('--maps', default=None,
                            help='Write boundary confidence (and gate) maps as PGM into this directory')
        parser.add_argument('--threads', type=positive_int, default=None)

    def run(self, model, data, bands, out, expect, tolerance, maps, threads, **options):
        expected = load_report(expect) if expect else None
        if bands is None:
            bands = [float(band) for band in expected.trimap] if expected else DEFAULT_BANDS
        loaded = load_model(model, threads=threads)
        self.echo_config({
            'model': str(model), 'data': str(data), 'bands': bands, 'expect': expect,
            'tolerance': tolerance, 'maps': maps, 'model_config': loaded.config.as_dict(),
        }, seed=loaded.config.seed)
        scenes = load_scenes(data)
        try:
            metrics = evaluate_model(loaded, scenes, bands)
        except ValueError as exc:
            self.usage_failed(str(exc))

        self.stdout.write(f"📊 mIoU: {metrics['miou']}")
        self.stdout.write(f"Pixel accuracy: {metrics['pixel_accuracy']}")
        self.stdout.write(f"Boundary IoU: {metrics['boundary_iou']}")
        for band, value in metrics['trimap'].items():
            self.stdout.write(f"Trimap {band}px: {value}")
        if out:
            write_json(out, metrics)
        if maps:
            written = write_confidence_maps(loaded, scenes, maps)
            self.stdout.write(f"Wrote {written} confidence maps to {maps}")

        if expected is not None:
            differing = compare_metrics(metrics, expected, tolerance)
            if differing:
                self.stdout.write('DIFFER')
                self.verification_failed(f"Metrics differ from {expect}: {', '.join(differing)}")
            self.stdout.write(self.style.SUCCESS(f"✅ EQUAL: metrics match {expect}"))
