import numpy as np
from django.conf import settings

from cli.base import BfpCommand, extent, int_pair, positive_int
from scan_engine.influence import family_masks
from scan_engine.params import ScanDirection

DIRECTIONS = {
    'se': ScanDirection.DAG_SOUTH_EAST,
    'sw': ScanDirection.DAG_SOUTH_WEST,
    'ne': ScanDirection.DAG_NORTH_EAST,
    'nw': ScanDirection.DAG_NORTH_WEST,
}


def render_mask(mask, probe):
    lines = []
    for r, row in enumerate(mask):
        cells = []
        for c, hit in enumerate(row):
            if (r, c) == tuple(probe):
                cells.append('@' if hit else 'o')
            else:
                cells.append('#' if hit else '.')
        lines.append(''.join(cells))
    return lines


class Command(BfpCommand):
    help = 'Print the empirical receptive field of one output probe for the UAG and DAG scans'

    def add_arguments(self, parser):
        parser.add_argument('--size', type=extent, default=(8, 8), help='HxW grid (default 8x8)')
        parser.add_argument('--probe', type=int_pair, default=(0, 0), help='Output probe r,c')
        parser.add_argument('--variant', choices=['uag', 'dag', 'both'], default='both')
        parser.add_argument('--gate', choices=['open', 'closed'], default='open')
        parser.add_argument('--direction', choices=sorted(DIRECTIONS), default='se')
        parser.add_argument('--channels', type=positive_int, default=2)
        parser.add_argument('--seed', type=int, default=None)

    def run(self, size, probe, variant, gate, direction, channels, seed, **options):
        seed = getattr(settings, 'BFP_SEED', 7) if seed is None else seed
        height, width = size
        self.echo_config({
            'size': f"{height}x{width}", 'probe': list(probe), 'variant': variant,
            'gate': gate, 'direction': direction, 'channels': channels,
        }, seed=seed)
        r, c = probe
        if not (0 <= r < height and 0 <= c < width):
            self.usage_failed(f"Probe {r},{c} lies outside the {height}x{width} grid")

        variants = ('uag', 'dag') if variant == 'both' else (variant,)
        masks = family_masks(height, width, DIRECTIONS[direction], gate_open=gate == 'open',
                             channels=channels, seed=seed, variants=variants)
        for name in variants:
            probe_mask = masks[name][r, c]
            self.stdout.write(f"{name.upper()} receptive field of ({r},{c}), {int(probe_mask.sum())} pixels:")
            for line in render_mask(probe_mask, probe):
                self.stdout.write(line)

        if variant == 'both':
            if np.array_equal(masks['uag'], masks['dag']):
                self.stdout.write(self.style.SUCCESS('✅ EQUAL: UAG and DAG reach the same pixels from every probe'))
            else:
                differing = int((masks['uag'] != masks['dag']).any(axis=(2, 3)).sum())
                self.stdout.write('DIFFER')
                self.verification_failed(f"Receptive fields differ at {differing} probes")
