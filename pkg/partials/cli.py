"""Programmatic front end: run(argv) -> exit code (0 ok, 1 usage error, 2 numeric failure)."""

import os
import sys

import django
from django.apps import apps
from django.core.management import call_command
from django.core.management.base import CommandError


def run(argv=None, stdout=None, stderr=None) -> int:
    argv = sys.argv[1:] if argv is None else [str(a) for a in argv]
    if not apps.ready:
        os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'mixcheck.settings')
        django.setup()
    try:
        call_command('mixcheck', *argv, stdout=stdout, stderr=stderr)
    except CommandError as e:
        (stderr or sys.stderr).write(f"mixcheck: {e}\n")
        return getattr(e, 'returncode', 1)
    return 0
