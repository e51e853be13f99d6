from dataclasses import replace
from pathlib import Path

from cli.base import BfpCommand, positive_int
from harness.model import build_model
from harness.regression import run_scenes
from harness.serializers import build_run_config
from harness.storage import CONFIG_NAME, read_json, save_run, write_json
from harness.training import train
from tensor_core.exceptions import DivergenceError


class Command(BfpCommand):
    help = 'Train the toy boundary-aware propagation model on synthetic scenes'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=None,
                            help='JSON run config with model, training and dataset sections')
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--threads', type=positive_int, default=None)

    def run(self, config, out, threads, **options):
        run_config = build_run_config(read_json(config) if config else None)
        if threads is not None:
            run_config.training = replace(run_config.training, threads=threads)
        self.echo_config(run_config.as_dict(), seed=run_config.model.seed)

        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / CONFIG_NAME, run_config.as_dict())
        scenes = run_scenes(run_config)
        model = build_model(run_config.model, threads=run_config.training.threads)
        self.stdout.write(
            f"📊 {run_config.model.variant} model, {model.parameter_count} parameters, "
            f"{len(scenes)} scenes"
        )

        try:
            report = train(model, scenes, run_config.training)
        except DivergenceError as exc:
            self.verification_failed(str(exc))
        except ValueError as exc:
            self.usage_failed(str(exc))

        save_run(out, report, model, scenes, run_config.training.smoothing_window)
        self.stdout.write(f"Initial loss: {report.initial_loss}")
        self.stdout.write(f"Final smoothed loss: {report.final_smoothed_loss}")
        self.stdout.write(f"mIoU: {report.miou}  boundary IoU: {report.boundary_iou}")
        self.stdout.write(self.style.SUCCESS(f"✅ Wrote run to {out}"))
