from cli.base import BfpCommand, int_list
from harness.ablation import ablation_grid
from harness.config import VARIANTS
from harness.serializers import build_run_config
from harness.storage import read_json, write_json

DEFAULT_SEEDS = [7, 8, 9]


def variant_list(value):
    return [item.strip() for item in value.split(',') if item.strip()]


def _fmt(value):
    return 'n/a' if value is None else f"{value:.4f}"


class Command(BfpCommand):
    help = 'Train every variant over several seeds and aggregate the metrics'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=None, help='Base JSON run config')
        parser.add_argument('--variants', type=variant_list, default=list(VARIANTS),
                            help=f"Comma-separated variants (default {','.join(VARIANTS)})")
        parser.add_argument('--seeds', type=int_list, default=DEFAULT_SEEDS)
        parser.add_argument('--out', default=None, help='Write the full table as JSON')

    def run(self, config, variants, seeds, out, **options):
        base = build_run_config(read_json(config) if config else None)
        self.echo_config({'base': base.as_dict(), 'variants': variants}, seed=seeds)
        if not seeds:
            self.usage_failed('At least one seed is required')
        try:
            table = ablation_grid(base, variants, seeds)
        except ValueError as exc:
            self.usage_failed(str(exc))

        for aggregate in table.aggregates:
            self.stdout.write(f"📊 {aggregate.variant} (seeds {aggregate.seeds})")
            for name, mean in aggregate.mean.items():
                self.stdout.write(f"   {name:<22} {_fmt(mean)} ± {_fmt(aggregate.spread[name])}")
        payload = table.as_dict()
        for band, gap in payload['trimap_gap'].items():
            self.stdout.write(f"Trimap {band}px gated - ungated: {_fmt(gap['difference'])} ({gap['direction']})")
        if out:
            write_json(out, payload)
        self.stdout.write(self.style.SUCCESS(f"✅ {len(table.rows)} runs complete"))
