"""
Django settings for base_dj project.

The project hosts a single app, ``sfc_provisioning``, driven entirely through
its management command. There is no web surface and no database; settings
only carry configuration for the simulator and its experiment harness.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.0/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")


SECRET_KEY = os.getenv("SECRET_KEY", "sfc-provisioning-local")

DEBUG = os.getenv("DEBUG", "False").lower() in ("true", "1", "yes")

ALLOWED_HOSTS = os.getenv("ALLOWED_HOSTS", "").split(",")


# Application definition

INSTALLED_APPS = [
    "sfc_provisioning",
]

# Simulations never touch a database; the test runner uses SimpleTestCase.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Simulator configuration

SFC_OUTPUT_DIR = os.getenv("SFC_OUTPUT_DIR", str(BASE_DIR / "results"))

SFC_GOLDEN_PATH = os.getenv(
    "SFC_GOLDEN_PATH",
    str(BASE_DIR / "sfc_provisioning" / "fixtures" / "golden_values.json"),
)

SFC_LOG_LEVEL = os.getenv("SFC_LOG_LEVEL", "INFO").upper()

# Engine defaults. Every key can be overridden by a --config JSON file.
SFC_DEFAULTS = {
    # Training and summary packet size in bytes; None uses the scenario's own
    "reference_packet_size": None,
    "enumeration_limit": 1_000_000,
    "workers": 1,
    "mfg": {
        "congestion_weight": None,  # None = 10x the largest single-hop delay
        "tol": 1e-9,
        "max_iters": 200,
        "damping": 0.5,
        "tie_break": "lowest",
        "literal_fpk": False,
    },
    "learner": {
        "episodes": 2000,
        "actor_lr": 0.05,
        "critic_lr": 0.1,
        "temperature_start": 1.0,
        "temperature_end": 0.1,
        "congestion_weight": None,
        "value_bound": 1e6,
        "reward_scale": None,  # None = largest single-hop delay
    },
    "ga": {
        "population_size": 50,
        "generations": 200,
        "crossover_rate": 0.8,
        "mutation_rate": 0.1,
        "tournament_size": 3,
        "infeasibility_penalty": 1000.0,
    },
}


# Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "sfc_provisioning": {
            "handlers": ["console"],
            "level": SFC_LOG_LEVEL,
            "propagate": False,
        },
    },
}
