from typing import Any, Dict, Optional

from curvedchsh.exceptions import CurvedChshError


class ConfigError(CurvedChshError):
    """The run configuration failed to parse or validate; ``fields`` maps dotted paths to messages."""

    exit_code = 2

    def __init__(self, message: str, fields: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.fields = fields or {}

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        if self.fields:
            payload['fields'] = self.fields
        return payload


class PartialOutputs(CurvedChshError):
    """Artifacts were written but some results inside them failed."""

    exit_code = 8
