"""
WSGI config for the curvedchsh project (serves the admin over recorded sweep runs).
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'curvedchsh.settings')

application = get_wsgi_application()
