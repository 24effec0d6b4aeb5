#!/usr/bin/env python
"""Command-line entry point: `python manage.py <command> [options]`."""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dagrid_project.settings')
    try:
        from dagrid.cli import main as dagrid_main
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    dagrid_main()


if __name__ == '__main__':
    main()
