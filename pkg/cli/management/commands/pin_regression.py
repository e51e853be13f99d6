from dataclasses import replace
from pathlib import Path

from cli.base import BfpCommand, positive_int
from harness.metrics import compare_reports
from harness.model import build_model
from harness.regression import (
    REGRESSION_CONFIG,
    REGRESSION_DIR,
    load_pin,
    pinned_config,
    regression_config,
    run_scenes,
)
from harness.storage import CONFIG_NAME, save_run, write_json
from harness.training import train
from tensor_core.exceptions import DivergenceError


class Command(BfpCommand):
    help = 'Record the fixed-seed regression run, or retrain and compare it against the recorded one'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=str(REGRESSION_CONFIG),
                            help='JSON run config (default harness/fixtures/regression.json)')
        parser.add_argument('--out', default=str(REGRESSION_DIR),
                            help='Pin directory (default harness/fixtures/regression)')
        parser.add_argument('--update', action='store_true', help='Overwrite an existing pin')
        parser.add_argument('--threads', type=positive_int, default=None)

    def run(self, config, out, update, threads, **options):
        run_config = regression_config(config)
        out = Path(out)
        pinned = None if update else load_pin(out)
        self.echo_config({
            'run': run_config.as_dict(), 'out': str(out), 'update': update,
            'compare': pinned is not None,
        }, seed=run_config.model.seed)
        if pinned is not None and pinned_config(out) != run_config:
            self.verification_failed(f"{config} differs from the config pinned in {out}; use --update")

        training = run_config.training if threads is None else replace(run_config.training, threads=threads)
        scenes = run_scenes(run_config)
        model = build_model(run_config.model, threads=training.threads)
        try:
            report = train(model, scenes, training)
        except DivergenceError as exc:
            self.verification_failed(str(exc))
        self.stdout.write(f"Initial loss: {report.initial_loss}")
        self.stdout.write(f"Final smoothed loss: {report.final_smoothed_loss}")
        self.stdout.write(f"mIoU: {report.miou}")

        if pinned is None:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / CONFIG_NAME, run_config.as_dict())
            save_run(out, report, model, scenes, training.smoothing_window)
            self.stdout.write(self.style.SUCCESS(f"📌 Pinned {report.steps}-step run in {out}"))
            return
        differing = compare_reports(report, pinned)
        if differing:
            self.stdout.write('DIFFER')
            self.verification_failed(f"Run differs from the pin in {out}: {', '.join(differing)}")
        self.stdout.write(self.style.SUCCESS(f"✅ EQUAL: run matches the pin in {out}"))
