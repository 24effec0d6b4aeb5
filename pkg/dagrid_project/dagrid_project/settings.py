"""
Django settings for dagrid_project project.

The project has no web surface and no database: Django hosts the
configuration layer, the logging setup and the management commands that
make up the `dagrid` command line.

For more information on this file, see
https://docs.djangoproject.com/en/4.2/topics/settings/
"""

from pathlib import Path
import os
import warnings

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Not used for anything cryptographic, Django only refuses to start without it.
SECRET_KEY = os.environ.get('DAGRID_SECRET_KEY', 'dagrid-local-only')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'dagrid',
]

# No persistence: the dummy backend is enough for SimpleTestCase.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


REST_FRAMEWORK = {
    'COMPACT_JSON': True,
    'STRICT_JSON': True,
    'UNICODE_JSON': False,
}


def _env_int(name, default):
    value = os.environ.get(name)
    if value is None or value == '':
        return default
    try:
        number = int(value)
    except ValueError:
        number = 0
    if number < 1:
        warnings.warn(f'{name}={value!r} is not a positive integer, using {default}', RuntimeWarning)
        return default
    return number


DAGRID = {
    'EPSILON': 1e-8,
    'GRADIENT_EPSILON': 1e-8,
    'WORKERS': _env_int('DAGRID_THREADS', 1),
    'CHUNK_CELLS': 16384,
    'FD_STEP': 1e-5,
    'KINK_MARGIN': 0.05,
    'POLAR_SIZE': 64,
    'POLAR_PRESETS': (32, 64, 128, 224),
    'CIRCULAR_RADII': [15, 10, 5],
}


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'dagrid': {
            'handlers': ['console'],
            'level': os.environ.get('DAGRID_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}
