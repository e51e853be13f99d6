"""Pytest wiring: configure Django so the apps' tests.py modules can be collected."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'bfp_lab.settings')
django.setup()
