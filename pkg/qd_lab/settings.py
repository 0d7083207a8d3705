"""
Django settings for the qd_lab project.

The project has no web surface: Django provides configuration, logging,
management commands and the test runner for the ``dcg`` app.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# load .env into environment variables for the entire process
load_dotenv(dotenv_path=BASE_DIR / ".env")

SECRET_KEY = os.getenv('SECRET_KEY', 'fallback-secret')
DEBUG = os.getenv('DEBUG', 'False') == 'True'
ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'dcg',
]

# No database: every artifact is written to the filesystem.
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Quality-diversity runs

# Root for relative ``output_dir`` values in experiment configs.
QD_OUTPUT_ROOT = Path(os.getenv('QD_OUTPUT_ROOT', '.'))

# Reuse CVT centroids across replications inside one process.
QD_CVT_CACHE = os.getenv('QD_CVT_CACHE', 'True') == 'True'


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'dcg': {
            'handlers': ['console'],
            'level': os.getenv('QD_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
