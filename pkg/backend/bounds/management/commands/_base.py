"""
Shared plumbing of the bounds management commands: argument groups, error
translation to exit codes, and loading of IMDP documents.
"""
import json
import logging
import sys

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from bounds.abstraction import InducedImdp
from bounds.conf import bounds_setting
from bounds.exceptions import EXIT_IO, EXIT_MODEL, EXIT_USAGE, BoundsError, ParseError
from bounds.imdp import Imdp
from bounds.storage import ArtifactStorage

logger = logging.getLogger('bounds')


def width_tag(width):
    """File-name fragment of a grid width, e.g. ``0.025``."""
    return repr(float(width))


def read_json(path):
    try:
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from exc


def load_imdp(path):
    return Imdp.from_document(read_json(path))


def load_induced(path):
    doc = read_json(path)
    if 'provenance' not in doc or 'partition' not in doc['provenance']:
        raise ParseError(f"{path}: not an induced IMDP file (no partition in the provenance header)")
    try:
        return InducedImdp.from_document(doc)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed provenance header: {exc!r}") from exc


def value_rows(imdp, table):
    return [[label, value] for label, value in zip(imdp.states, table.values)]


def strategy_rows(imdp, strategy):
    return [[label, strategy.action(i) or ''] for i, label in enumerate(imdp.states)]


class BoundsCommand(BaseCommand):
    """Base class translating library errors into exit codes.

    Subclasses implement :meth:`run`; :attr:`stage` names the step reported
    when a command aborts.
    """

    stage = None

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def error(message):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
            raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)

        parser.error = error
        return parser

    def add_output_argument(self, parser):
        parser.add_argument('--output', default=None,
                            help='Output directory (default: IMDP_BOUNDS_OUTPUT_DIR)')

    def add_solver_arguments(self, parser):
        parser.add_argument('--tol', type=float, default=None, help='Sup-norm residual tolerance')
        parser.add_argument('--max-iter', type=int, default=None, help='Sweep budget')
        parser.add_argument('--divergence-cap', type=float, default=None,
                            help='Values above the cap are reported as infinite')

    def add_threads_argument(self, parser):
        parser.add_argument('--threads', type=int, default=None, help='Worker threads for induction')

    def solver_options(self, options):
        return {
            'tol': options.get('tol') or bounds_setting('VI_TOL'),
            'max_iter': options.get('max_iter') or bounds_setting('VI_MAX_ITER'),
            'divergence_cap': options.get('divergence_cap') or bounds_setting('DIVERGENCE_CAP'),
        }

    def storage(self, options):
        return ArtifactStorage(options.get('output') or bounds_setting('OUTPUT_DIR'))

    def handle(self, *args, **options):
        try:
            self.run(*args, **options)
        except BoundsError as exc:
            self._abort(exc, exc.exit_code)
        except ValidationError as exc:
            self._abort(exc.detail, EXIT_MODEL)
        except OSError as exc:
            self._abort(exc, EXIT_IO)

    def _abort(self, reason, code):
        where = f"{self.stage}: " if self.stage else ''
        logger.error(f"{where}{reason}")
        raise CommandError(f"{where}{reason}", returncode=code)

    def run(self, *args, **options):
        raise NotImplementedError
