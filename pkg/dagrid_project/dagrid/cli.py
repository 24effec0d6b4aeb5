"""
The `dagrid` command line.

    dagrid polar-roundtrip --in x.pgm --hr 64 --wpsi 64 --out y.pgm

Subcommand names are the management command names with dashes, so
`polar-roundtrip` runs `manage.py polar_roundtrip`. Django's own commands
(`test`, `help`, ...) stay reachable.
"""
import os
import sys

import django
from django.core.management import ManagementUtility, get_commands


COMMANDS = (
    'polar-roundtrip',
    'polar-filter',
    'polar-sample',
    'circle-detect',
    'gradcheck',
    'adjoint-suite',
    'bench',
    'synth',
)


def usage():
    return 'usage: dagrid <command> [options]\n\ncommands:\n' + ''.join(
        f'  {name}\n' for name in COMMANDS)


def run(argv):
    """Run one subcommand and return its exit code."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dagrid_project.settings')
    argv = list(argv)
    if not argv or argv[0] in ('-h', '--help'):
        sys.stderr.write(usage())
        return 0 if argv else 2

    django.setup()
    name = argv[0].replace('-', '_')
    if name not in get_commands():
        sys.stderr.write(f'dagrid: unknown command {argv[0]!r}\n\n{usage()}')
        return 2

    try:
        ManagementUtility(['dagrid', name] + argv[1:]).execute()
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0


def main():
    sys.exit(run(sys.argv[1:]))
