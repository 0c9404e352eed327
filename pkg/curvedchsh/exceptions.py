from typing import Any, Dict


class CurvedChshError(Exception):
    """Base class for every error raised by the numerics apps."""

    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'success': False,
            'error_type': type(self).__name__,
            'error': str(self),
            'exit_code': self.exit_code,
        }
