"""
Settings for the dagrid app, read from the `DAGRID` dict in settings.py.

    from dagrid.conf import dagrid_settings
    epsilon = dagrid_settings.EPSILON

Unknown keys raise AttributeError, missing keys fall back to DEFAULTS.
"""
from django.conf import settings
from django.core.signals import setting_changed
from rest_framework.settings import APISettings


DEFAULTS = {
    'EPSILON': 1e-8,
    'GRADIENT_EPSILON': 1e-8,
    'WORKERS': 1,
    'CHUNK_CELLS': 16384,
    'FD_STEP': 1e-5,
    'KINK_MARGIN': 0.05,
    'POLAR_SIZE': 64,
    'POLAR_PRESETS': (32, 64, 128, 224),
    'CIRCULAR_RADII': [15, 10, 5],
}


class DagridSettings(APISettings):

    @property
    def user_settings(self):
        if not hasattr(self, '_user_settings'):
            self._user_settings = getattr(settings, 'DAGRID', {})
        return self._user_settings


dagrid_settings = DagridSettings(None, DEFAULTS)


def reload_dagrid_settings(*args, **kwargs):
    if kwargs['setting'] == 'DAGRID':
        dagrid_settings.reload()


setting_changed.connect(reload_dagrid_settings)
