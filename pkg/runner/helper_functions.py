import json
import logging
from typing import Any, Dict

from django.core.management.base import BaseCommand, CommandError

from curvedchsh.exceptions import CurvedChshError

logger = logging.getLogger(__name__)

EXIT_CODES = {
    0: 'success',
    1: 'unexpected error',
    2: 'config or schema error',
    3: 'geometry or scenario failure',
    4: 'dynamics failure',
    5: 'inverse failure',
    6: 'worldviews failure',
    7: 'sweep failure',
    8: 'partial outputs',
}


def error_payload(error: Exception) -> Dict[str, Any]:
    if isinstance(error, CurvedChshError):
        return error.to_dict()
    return {'success': False, 'error_type': type(error).__name__, 'error': str(error), 'exit_code': 1}


def command_failure(command: BaseCommand, error: Exception) -> CommandError:
    """Write the error as one JSON object on stderr and return the CommandError carrying its exit code."""
    payload = error_payload(error)
    logger.error(f"{payload['error_type']}: {payload['error']}")
    command.stderr.write(json.dumps(payload, sort_keys=True, default=str))
    return CommandError(payload['error'], returncode=payload['exit_code'])
