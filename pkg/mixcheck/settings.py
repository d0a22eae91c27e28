"""
Django settings for the mixcheck project.

The project never serves HTTP: Django provides the management-command
front end, configuration, logging and the test runner.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent

# Optional .env next to manage.py (only MIXCHECK_THREADS is read from it)
load_dotenv(BASE_DIR / '.env')

SECRET_KEY = 'mixcheck-offline-numerics-no-sessions'

DEBUG = False

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'partials',
]

# No database: every test case is a SimpleTestCase
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Logging configuration: reports go to stdout, diagnostics to stderr
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'partials': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}

# --- Numerics settings ---
# Worker threads for grid audits; the only knob read from the environment.
MIXCHECK_THREADS = max(1, int(os.getenv('MIXCHECK_THREADS', 1)))

# Defaults for every subcommand flag; --config TOML and flags override them.
MIXCHECK_DEFAULTS = {
    'rect': None,                 # None -> the function's own domain
    'grid': '51x51',
    'tol': 1e-5,
    'seed': 42,
    'eta': 1e-3,
    'factor': 10.0,
    'radii': '1e-1,3e-2,1e-2,3e-3,1e-3',
    'theorem1_radii': '1e-2,3e-3,1e-3,3e-4',
    'pairs': 128,
    'slices': 9,
    'samples': 64,
    'panels': 64,
    'levels': 1,
    'scheme': 'central',
    'axis': 'x',
    'order': 'xy',
    'derivative_axis': 'x',
    'lipschitz_axis': 'y',
}
