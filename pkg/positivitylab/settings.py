"""
Django settings for the positivitylab project.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Try to use python-decouple for environment variables, fallback to os.environ
try:
    from decouple import config
    USE_DECOUPLE = True
except ImportError:
    USE_DECOUPLE = False
    def config(key, default='', cast=None):
        value = os.environ.get(key, default)
        return cast(value) if cast else value

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# The lab has no web surface; the key only satisfies Django's startup checks.
SECRET_KEY = config('SECRET_KEY', default='positivitylab-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'lab.apps.LabConfig',
]

MIDDLEWARE = []


# Database (run history only)

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Laboratory settings (set these in environment variables or .env file)

# Reports directory; overrides the [output] dir of experiment configs.
LAB_OUTPUT_DIR = config('LAB_OUTPUT_DIR', default='')
LAB_DEFAULT_OUTPUT_DIR = BASE_DIR / 'reports'

# C in the default inequality tolerance tol = C * h^3 * ||u||_inf * max w.
LAB_CERTIFICATE_CONSTANT = config('LAB_CERTIFICATE_CONSTANT', default=10.0, cast=float)

LAB_DEFAULT_SEED = config('LAB_DEFAULT_SEED', default=20240601, cast=int)

LAB_REPORT_SCHEMA_VERSION = 1

LAB_LOG_LEVEL = config('LAB_LOG_LEVEL', default='INFO')


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'lab': {
            'handlers': ['console'],
            'level': LAB_LOG_LEVEL,
            'propagate': False,
        },
    },
}
