#!/usr/bin/env python
"""Command-line entry point: ``validate`` and ``run`` plus the stock Django commands."""
import os
import sys


def main():
    """Dispatch a management command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'curvedchsh.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Is it installed and on your PYTHONPATH? "
            "Install the pinned stack with `pip install -r requirements.txt`."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
