"""Pytest wiring: set up Django the same way ``manage.py test`` does."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'curvedchsh.settings')
django.setup()


def pytest_sessionstart(session):
    from django.test.utils import setup_databases, setup_test_environment

    setup_test_environment()
    session.config._django_db_state = setup_databases(verbosity=0, interactive=False)


def pytest_sessionfinish(session, exitstatus):
    from django.test.utils import teardown_databases, teardown_test_environment

    state = getattr(session.config, '_django_db_state', None)
    if state is not None:
        teardown_databases(state, verbosity=0)
    teardown_test_environment()
