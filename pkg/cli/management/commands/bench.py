import csv
from pathlib import Path

from django.conf import settings

from cli.base import BfpCommand, extent_list, positive_int
from scan_engine.benchmark import BENCH_COLUMNS, PUBLISHED_LOOPS, PUBLISHED_SIZES, count_steps, run_benchmark
from scan_engine.scans import resolve_threads


def loop_notes(sizes):
    """Step formulas next to the published loop counts, printed beside the plain CSV."""
    lines = ['sequential_steps: dag = 4HW (four directions), uag = 2H + 4W (six scans)']
    for width, height in sizes:
        steps = count_steps(height, width)
        published = PUBLISHED_LOOPS.get((width, height))
        line = f"{width}x{height}: formula dag={steps['dag_total']} uag={steps['uag_total']}"
        if published:
            line += f"; published loops dag={published['dag']} uag={published['uag']}"
        lines.append(line)
    return lines


class Command(BfpCommand):
    help = 'Time the pixel-by-pixel DAG scan against the row-parallel UAG scans'

    def add_arguments(self, parser):
        parser.add_argument('--sizes', type=extent_list, default=None,
                            help='Comma-separated WxH feature sizes (default 60x45,120x90)')
        parser.add_argument('--channels', type=positive_int, default=32)
        parser.add_argument('--threads', type=positive_int, default=None)
        parser.add_argument('--repeats', type=positive_int, default=1)
        parser.add_argument('--seed', type=int, default=None)
        parser.add_argument('--out', required=True, help='Output CSV path')

    def run(self, sizes, channels, threads, repeats, seed, out, **options):
        sizes = sizes or [tuple(size) for size in PUBLISHED_SIZES]
        seed = getattr(settings, 'BFP_SEED', 7) if seed is None else seed
        threads = resolve_threads(threads)
        self.echo_config({
            'sizes': [f"{width}x{height}" for width, height in sizes], 'channels': channels,
            'threads': threads, 'repeats': repeats, 'out': str(out),
        }, seed=seed)
        try:
            rows = run_benchmark(sizes, channels=channels, threads=threads, repeats=repeats, seed=seed)
        except RuntimeError as exc:
            self.verification_failed(str(exc))
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='') as stream:
            writer = csv.DictWriter(stream, fieldnames=BENCH_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow(row.as_dict())
        for line in loop_notes(sizes):
            self.stdout.write(line)
        for row in rows:
            self.stdout.write(
                f"{row.resolution:>9} {row.variant:>4} steps={row.sequential_steps:<6} "
                f"{row.wall_clock_ms:10.3f} ms threads={row.threads}"
            )
        self.stdout.write(self.style.SUCCESS(f"📊 Wrote {len(rows)} rows to {path}"))
