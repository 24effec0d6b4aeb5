"""Pytest wiring: configure Django the way manage.py does before collection."""
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'dagrid_project'))
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dagrid_project.settings')

import django  # noqa: E402

django.setup()
