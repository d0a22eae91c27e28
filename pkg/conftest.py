import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'mixcheck.settings')
django.setup()
