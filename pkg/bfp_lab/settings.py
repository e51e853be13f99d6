"""
Django settings for the bfp_lab project.

bfp_lab has no web surface: Django supplies configuration, logging,
management commands and the test runner for the propagation library.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Initialize environment variables
env = environ.Env(
    DEBUG=(bool, False),
    BFP_THREADS=(int, 1),
    BFP_IGNORE_VALUE=(int, 255),
    BFP_BOUNDARY_RADIUS=(float, 9.0),
    BFP_TOY_BOUNDARY_RADIUS=(float, 3.0),
    BFP_GATE_ALPHA=(float, 20.0),
    BFP_GATE_GAMMA=(float, 4.0),
    BFP_GATE_BETA=(float, 1.0),
    BFP_SEED=(int, 7),
    BFP_LOG_LEVEL=(str, 'INFO'),
)

# Read .env file
environ.Env.read_env(BASE_DIR / '.env')

# Nothing is signed or served; the key only satisfies Django's startup checks.
SECRET_KEY = env('SECRET_KEY', default='bfp-lab-local-only')

DEBUG = env('DEBUG')

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',

    # Third-party apps
    'rest_framework',

    # Local apps
    'tensor_core',
    'boundary_labels',
    'scan_engine',
    'confidence',
    'harness',
    'cli',
]


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases
# No app defines models; the entry keeps Django's checks and test runner happy.

DATABASES = {
    'default': {
        'ENGINE': env('DB_ENGINE', default='django.db.backends.sqlite3'),
        'NAME': BASE_DIR / env('DB_NAME', default='db.sqlite3'),
    }
}


# REST Framework Configuration (serializers and JSON rendering only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'UNAUTHENTICATED_USER': None,
}


# Propagation lab configuration
BFP_THREADS = env('BFP_THREADS')
BFP_IGNORE_VALUE = env('BFP_IGNORE_VALUE')

# Trimap of 18 pixels around label boundaries on full-resolution label maps
BFP_BOUNDARY_RADIUS = env('BFP_BOUNDARY_RADIUS')

# Toy scenes are 64x64; a 9 px band would swallow the small shapes
BFP_TOY_BOUNDARY_RADIUS = env('BFP_TOY_BOUNDARY_RADIUS')

BFP_GATE_ALPHA = env('BFP_GATE_ALPHA')
BFP_GATE_GAMMA = env('BFP_GATE_GAMMA')
BFP_GATE_BETA = env('BFP_GATE_BETA')
BFP_SEED = env('BFP_SEED')

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'bfp_lab.log',
            'formatter': 'verbose',
        },
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['file', 'console'],
            'level': 'WARNING',
            'propagate': True,
        },
        'tensor_core': {
            'handlers': ['file', 'console'],
            'level': env('BFP_LOG_LEVEL'),
            'propagate': False,
        },
        'boundary_labels': {
            'handlers': ['file', 'console'],
            'level': env('BFP_LOG_LEVEL'),
            'propagate': False,
        },
        'scan_engine': {
            'handlers': ['file', 'console'],
            'level': env('BFP_LOG_LEVEL'),
            'propagate': False,
        },
        'confidence': {
            'handlers': ['file', 'console'],
            'level': env('BFP_LOG_LEVEL'),
            'propagate': False,
        },
        'harness': {
            'handlers': ['file', 'console'],
            'level': env('BFP_LOG_LEVEL'),
            'propagate': False,
        },
        'cli': {
            'handlers': ['file', 'console'],
            'level': env('BFP_LOG_LEVEL'),
            'propagate': False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/4.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
