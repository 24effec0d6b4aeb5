import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework.renderers import JSONRenderer

from dagrid.exceptions import DagridError
from dagrid.io import read_dgt, read_pgm, synth, write_dgt, write_pgm
from dagrid.tensor import as_tensor


logger = logging.getLogger(__name__)


class DagridCommand(BaseCommand):
    """
    Common plumbing of the dagrid commands.

    Options are validated by `serializer_class` before anything runs, the
    result dict returned by `run` goes through `result_serializer_class`
    and is printed as one line of JSON. Exit codes: 2 for invalid options,
    1 for library errors and failed checks.
    """
    requires_system_checks = []
    serializer_class = None
    result_serializer_class = None

    def add_arguments(self, parser):
        parser.add_argument('--threads', help='worker threads (default: DAGRID_THREADS or 1)')
        parser.add_argument('--seed', help='random seed')
        parser.add_argument('--metrics-out', dest='metrics_out',
                            help='also write the JSON result to this file')

    def add_source_arguments(self, parser):
        parser.add_argument('--in', dest='in_path', help='input image (.pgm or .dgt)')
        parser.add_argument('--phantom', help='generate the input: disk, ring, checker, smooth_blob')
        parser.add_argument('--size', help='phantom side length')
        parser.add_argument('--radius', help='disk or ring radius')
        parser.add_argument('--thickness', help='ring thickness')
        parser.add_argument('--cell', help='checker cell size')
        parser.add_argument('--sigmas', help='comma separated blob sigmas')
        parser.add_argument('--noise', help='Gaussian noise sigma')

    def add_polar_arguments(self, parser):
        parser.add_argument('--hr', help='radial bins H_r')
        parser.add_argument('--wpsi', help='angular bins W_psi')
        parser.add_argument('--s-r', dest='s_r', help='radial rate, pixels per radial bin')
        parser.add_argument('--s-theta', dest='s_theta', help='angular rate, radians per angular bin')
        parser.add_argument('--center', help='"geometric", "mass" or "row,col"')
        parser.add_argument('--kernel', help='nearest or bilinear')
        parser.add_argument('--angular-wrap', dest='angular_wrap', help='true or false')
        parser.add_argument('--cover-corners', dest='cover_corners', help='true or false')
        parser.add_argument('--epsilon', help='normalization epsilon')
        parser.add_argument('--out', help='output file (.pgm or .dgt)')

    def add_filter_arguments(self, parser):
        parser.add_argument('--filter', help='none, box or gaussian')
        parser.add_argument('--filter-radius', dest='filter_radius', help='box radius')
        parser.add_argument('--filter-sigma', dest='filter_sigma', help='gaussian sigma')

    def validate(self, options):
        fields = self.serializer_class().fields
        data = {key: value for key, value in options.items()
                if key in fields and value is not None}
        serializer = self.serializer_class(data=data)
        if not serializer.is_valid():
            raise CommandError(self.format_errors(serializer.errors), returncode=2)
        return serializer

    def format_errors(self, errors):
        parts = []
        for field, messages in errors.items():
            if isinstance(messages, dict):
                messages = [f'{key}: {value}' for key, value in messages.items()]
            text = '; '.join(str(message) for message in messages)
            parts.append(text if field == 'non_field_errors' else f'--{field.replace("_", "-")}: {text}')
        return 'invalid options: ' + ' | '.join(parts)

    def handle(self, *args, **options):
        serializer = self.validate(options)
        try:
            result = self.run(serializer)
        except DagridError as exc:
            raise CommandError(f'{exc.default_code}: {exc.detail}', returncode=1)
        except OSError as exc:
            raise CommandError(f'io_error: {exc}', returncode=1)
        passed = result.pop('passed_check', True)
        self.emit(result, serializer.validated_data.get('metrics_out'))
        if not passed:
            raise CommandError(f'{result["command"]} failed', returncode=1)

    def run(self, serializer):
        raise NotImplementedError('subclasses of DagridCommand must provide a run() method')

    def emit(self, result, metrics_out=None):
        data = self.result_serializer_class(result).data
        line = JSONRenderer().render(data).decode('ascii')
        self.stdout.write(line)
        if metrics_out:
            Path(metrics_out).write_text(line + '\n', encoding='ascii')
            logger.info('metrics written to %s', metrics_out)

    def load_source(self, data):
        """The input image of the command, from --in or --phantom."""
        if data.get('in_path'):
            return load_tensor(data['in_path'])
        return synth(data['phantom'], data['size'], data['size'], radius=data['radius'],
                     thickness=data['thickness'], cell=data['cell'], sigmas=data['sigmas'],
                     noise_sigma=data['noise'], seed=data['seed'])


def load_tensor(path):
    if Path(path).suffix.lower() == '.dgt':
        return as_tensor(read_dgt(path), path)
    return read_pgm(path)


def save_tensor(t, path, normalize=False):
    """.dgt keeps the exact values, anything else is written as a PGM."""
    if Path(path).suffix.lower() == '.dgt':
        write_dgt(t, path)
    else:
        write_pgm(t, path, normalize=normalize)
    logger.info('wrote %s', path)
