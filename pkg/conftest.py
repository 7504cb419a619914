"""Pytest wiring: configure Django so the app's SimpleTestCase suites run."""
import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "base_dj.settings")
django.setup()
