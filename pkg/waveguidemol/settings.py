"""
Django settings for the waveguide artificial-molecule toolkit.

The project has no web surface: Django provides settings, logging, the
management commands and the run ledger.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used for signing; nothing is served.
SECRET_KEY = os.environ.get('WAVEGUIDEMOL_SECRET_KEY', 'django-insecure-local-toolkit-key')

DEBUG = False

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'core',
]

# Database - SQLite run ledger
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework Configuration (serializers and renderers only)
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'COERCE_DECIMAL_TO_STRING': False,
}

# Simulation Toolkit Specific Settings
SIM_DEFAULT_OUTPUT_DIR = Path(os.environ.get('WAVEGUIDEMOL_OUTPUT_DIR', BASE_DIR / 'runs'))
SIM_DEFAULT_WORKERS = 1
SIM_DEFAULT_TOLERANCE = 1e-10
SIM_RECORD_RUNS = True
SIM_SHOT_CHUNK = 1_000_000
SIM_TOOLKIT_VERSION = '1.0.0'

# Simple logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
        'core': {
            'handlers': ['console'],
            'level': os.environ.get('WAVEGUIDEMOL_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
