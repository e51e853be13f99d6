from boundary_labels.pgm import read_label_pgm, write_label_pgm
from boundary_labels.services import (
    LabelMap,
    boundary_fraction,
    default_ignore_value,
    default_radius,
    generate_boundary_labels,
)
from cli.base import BfpCommand, positive_float


class Command(BfpCommand):
    help = 'Write the boundary-augmented (N + 1 class) version of a PGM label map'

    def add_arguments(self, parser):
        parser.add_argument('--in', dest='source', required=True, help='Input label map (PGM)')
        parser.add_argument('--out', required=True, help='Output label map (PGM)')
        parser.add_argument('--radius', type=positive_float, default=None,
                            help='Boundary radius in pixels (default BFP_BOUNDARY_RADIUS, 9)')
        parser.add_argument('--ignore', type=int, default=None,
                            help='Ignore label (default BFP_IGNORE_VALUE, 255)')
        parser.add_argument('--num-classes', type=int, default=None,
                            help='Class count N (default: largest label + 1)')

    def run(self, source, out, radius, ignore, num_classes, **options):
        radius = default_radius() if radius is None else radius
        ignore = default_ignore_value() if ignore is None else ignore
        self.echo_config({
            'in': str(source), 'out': str(out), 'radius': radius,
            'ignore': ignore, 'num_classes': num_classes,
        }, seed=None)
        labels = LabelMap.infer(read_label_pgm(source), ignore_value=ignore, num_classes=num_classes)
        augmented = generate_boundary_labels(labels, radius)
        write_label_pgm(out, augmented.values, num_classes=augmented.num_classes)
        fraction = boundary_fraction(augmented)
        self.stdout.write(f"Boundary class: {augmented.num_classes - 1} of {augmented.num_classes}")
        self.stdout.write(self.style.SUCCESS(f"✅ Boundary fraction: {fraction:.6f}"))
