"""
Django settings for the curvedchsh project.

Numeric defaults for the geometry, dynamics, inverse and worldview apps live
here and are read through ``django.conf.settings``; run configurations only
override them per invocation.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-curvedchsh-local-runs-only')

DEBUG = os.environ.get('DJANGO_DEBUG', '1') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',

    'geometry',
    'scenario',
    'dynamics',
    'inverse',
    'worldviews',
    'chsh_scan',
    'runner',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'curvedchsh.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'curvedchsh.wsgi.application'


# Database
# Only sweep runs recorded with ``run sweep --record`` are stored.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


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
    'root': {
        'handlers': ['console'],
        'level': os.environ.get('CURVEDCHSH_LOG_LEVEL', 'WARNING'),
    },
}


# Geometry

GEOMETRY_STEP = 0.01
GEOMETRY_CHART_BOUND = 1.0e3
GEOMETRY_FD_STEP = 1.0e-5
GEOMETRY_NEWTON_MAX_ITER = 50
GEOMETRY_NEWTON_TOL = 1.0e-10
GEOMETRY_CLOSURE_TOL = 1.0e-6
GEOMETRY_PROJECTION_EPS = 1.0e-9
GEOMETRY_NULL_TOL = 1.0e-7

# Scenario

SCENARIO_STEP = 0.02
SCENARIO_INTERCEPT_MAX_ITER = 50

# Dynamics

QUADRATURE_NODES = 2048
QUADRATURE_MIN_NODES = 64
MC_CHUNK_SIZE = 1 << 16
MC_REQUIRE_SEED = True
DEFAULT_THREADS = int(os.environ.get('CURVEDCHSH_THREADS', '1'))

# Inverse problem

INVERSE_BINS = 64
INVERSE_MAX_ITER = 100_000
INVERSE_TOL = 1.0e-10

# Worldviews

WORLDVIEW_STATE_CAP = 1_000_000
SIEVE_POSET_CAP = 20

# Sweeps

SWEEP_MAX_FAILURE_FRACTION = 0.2

CODE_VERSION = '0.3.0'
