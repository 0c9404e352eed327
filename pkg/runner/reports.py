import csv
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    """What one subcommand produced: a JSON payload, plot-ready tables and a one-line summary."""

    name: str
    payload: Dict[str, Any]
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    summary: str = ''
    partial: bool = False


class ReportWriter:
    def __init__(self, directory: str, formats: Sequence[str] = ('json', 'csv')):
        self.directory = directory
        self.formats = tuple(formats)
        os.makedirs(self.directory, exist_ok=True)
        logger.info(f"Writing reports to {self.directory}")

    def path(self, filename: str) -> str:
        return os.path.join(self.directory, filename)

    def write_json(self, name: str, payload: Dict[str, Any]) -> str:
        path = self.path(f"{name}.json")
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=str)
            f.write('\n')
        return path

    def write_csv(self, name: str, rows: Iterable[Dict[str, Any]], fieldnames: Optional[List[str]] = None) -> str:
        rows = list(rows)
        if fieldnames is None:
            fieldnames = []
            for row in rows:
                fieldnames.extend(key for key in row if key not in fieldnames)
        path = self.path(f"{name}.csv")
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction='ignore', lineterminator='\n')
            writer.writeheader()
            writer.writerows(rows)
        return path

    def write(self, result: RunResult) -> List[str]:
        written = []
        if 'json' in self.formats:
            written.append(self.write_json(result.name, {**result.payload, 'partial': result.partial}))
        if 'csv' in self.formats:
            for table, rows in result.tables.items():
                written.append(self.write_csv(f"{result.name}_{table}", rows))
        logger.info(f"{result.name}: wrote {len(written)} files")
        return written
