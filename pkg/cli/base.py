"""
Shared behaviour of the bfp_lab management commands.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 I/O
error. Every command echoes its fully resolved configuration and seed
before doing any work.
"""

import argparse
import logging
import sys

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError
from rest_framework.renderers import JSONRenderer

from tensor_core.exceptions import LabelValueError, TensorFormatError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_IO = 3


def extent(value):
    """``AxB`` into a pair of positive ints."""
    try:
        first, second = (int(part) for part in value.lower().split('x'))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AxB with positive integers, got {value!r}")
    if first < 1 or second < 1:
        raise argparse.ArgumentTypeError(f"extents must be positive, got {value!r}")
    return first, second


def extent_list(value):
    return [extent(item) for item in value.split(',') if item.strip()]


def int_pair(value):
    try:
        first, second = (int(part) for part in value.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {value!r}")
    return first, second


def int_list(value):
    try:
        return [int(item) for item in value.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def float_list(value):
    try:
        return [float(item) for item in value.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}")


def positive_float(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {value!r}")
    if number <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value!r}")
    return number


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return number


class BfpCommand(BaseCommand):
    """
    Base class for the workflow commands. Subclasses implement
    ``run(**options)`` instead of ``handle``.
    """
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def usage_error(message):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                sys.stderr.write(f"{parser.prog}: error: {message}\n")
                sys.exit(EXIT_USAGE)
            raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)

        parser.error = usage_error
        return parser

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except CommandError:
            raise
        except ValidationError as exc:
            raise CommandError(f"Invalid configuration: {exc.detail}", returncode=EXIT_USAGE) from exc
        except (OSError, TensorFormatError, LabelValueError) as exc:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed on input/output: {exc}")
            raise CommandError(str(exc), returncode=EXIT_IO) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of BfpCommand must provide a run() method')

    def echo_config(self, config, seed):
        rendered = JSONRenderer().render(config, renderer_context={'indent': 2}).decode()
        self.stdout.write('Resolved config:')
        self.stdout.write(rendered)
        self.stdout.write(f"Seed: {seed}")

    def usage_failed(self, message):
        raise CommandError(message, returncode=EXIT_USAGE)

    def verification_failed(self, message):
        self.stdout.write(self.style.ERROR(f"❌ {message}"))
        raise CommandError(message, returncode=EXIT_VERIFICATION)
