"""
Django settings for the CaLa training project.

The project has no web surface: Django supplies the settings layer, the
management-command CLI and the test runner. Model, training and evaluation
defaults live in CALA_DEFAULTS and are validated by
core.config.RunConfigSerializer.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('CALA_SECRET_KEY', 'cala-desk-scale-not-a-secret')

DEBUG = os.environ.get('CALA_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'core',
    'cala',
    'retrieval',
]

# Nothing is persisted through the ORM.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging
# Verbosity of the library loggers comes from CALA_LOG_LEVEL.

CALA_LOG_LEVEL = os.environ.get('CALA_LOG_LEVEL', 'INFO').upper()

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
    'loggers': {
        'core': {'handlers': ['console'], 'level': CALA_LOG_LEVEL},
        'cala': {'handlers': ['console'], 'level': CALA_LOG_LEVEL},
        'retrieval': {'handlers': ['console'], 'level': CALA_LOG_LEVEL},
    },
}


# Run configuration defaults (desk scale).
# alpha, beta, tau and tac_layers follow the published settings.

CALA_DEFAULTS = {
    # model
    'dim': 32,
    'image_vocab': 24,
    'text_vocab': 32,
    'max_tokens': 16,
    'prompts': 8,
    'tac_layers': 4,
    'heads': 1,
    'positional': True,
    'image_positional': False,
    'cross_attention': True,
    # objective
    'alpha': 0.45,
    'beta': 0.1,
    'tau': 0.1,
    # training
    'batch_size': 16,
    'epochs': 20,
    'learning_rate': 5e-3,
    'seed': 0,
    # ablations
    'share_text_projection': True,
    'share_tac_branches': False,
    'reference_features': 'attentive',
    'disable_tbia': False,
    'disable_ctr': False,
    # synthetic benchmark
    'n_train': 512,
    'n_val': 128,
    'n_attributes': 24,
    'objects': 4,
    'text_len': 2,
    'noise_sigma': 0.05,
    'subset_size': 5,
    # evaluation
    'workers': 1,
    # paths
    'data_dir': os.environ.get('CALA_DATA_DIR', str(BASE_DIR / 'data')),
    'checkpoint': str(BASE_DIR / 'runs' / 'checkpoint.json'),
    'report': str(BASE_DIR / 'runs' / 'report'),
    'train_log': str(BASE_DIR / 'runs' / 'train_log.jsonl'),
}
