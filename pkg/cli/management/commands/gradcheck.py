from cli.base import BfpCommand, positive_int
from cli.suite import DEFAULT_SEEDS, run_suite, suite_cases


class Command(BfpCommand):
    help = 'Check every hand-written gradient against central finite differences'

    def add_arguments(self, parser):
        group = parser.add_mutually_exclusive_group()
        group.add_argument('--all', action='store_true', dest='run_all',
                           help='Run every check (the default)')
        group.add_argument('--check', action='append', dest='checks', metavar='NAME',
                           help='Run only this check; repeatable')
        parser.add_argument('--seeds', type=positive_int, default=DEFAULT_SEEDS)
        parser.add_argument('--list', action='store_true', dest='list_checks',
                            help='List check names and exit')

    def run(self, run_all, checks, seeds, list_checks, **options):
        if list_checks:
            for case in suite_cases():
                self.stdout.write(f"{case.name}  (tolerance {case.tolerance:.0e})")
            return
        self.echo_config({'checks': checks or 'all', 'seeds': seeds}, seed=f"0..{seeds - 1} (kinked seeds skipped)")
        try:
            results = run_suite(seeds, checks)
        except ValueError as exc:
            self.usage_failed(str(exc))

        width = max(len(result.name) for result in results)
        self.stdout.write(f"{'check':<{width}}  {'max rel error':>13}  {'tolerance':>9}  seeds  status")
        for result in results:
            status = 'ok' if result.passed else 'FAIL'
            self.stdout.write(
                f"{result.name:<{width}}  {result.max_rel_error:13.3e}  {result.tolerance:9.0e}  "
                f"{result.points:>5}  {status}"
            )
        failed = [result.name for result in results if not result.passed]
        if failed:
            self.verification_failed(f"Gradient checks failed: {', '.join(failed)}")
        self.stdout.write(self.style.SUCCESS(f"🎉 All {len(results)} gradient checks passed"))
