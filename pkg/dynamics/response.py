import logging
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from geometry.helper_functions import TWO_PI

from .exceptions import InvalidDistribution

logger = logging.getLogger(__name__)

OUTCOMES = (1, -1)
KINDS = ('malus-classical', 'custom-table')


def require_outcome(outcome: int) -> int:
    if outcome not in OUTCOMES:
        raise ValueError(f"Outcome must be +1 or -1, got {outcome}")
    return outcome


class ResponseFunction:
    """Probability f(A, θ) that a polariser at angle θ to the polarisation reports A."""

    def __init__(self, kind: str = 'malus-classical', table: Optional[Sequence[float]] = None):
        if kind not in KINDS:
            raise ValueError(f"Unknown response kind '{kind}'")
        self.kind = kind
        self.table = None
        self._spline = None
        if kind == 'custom-table':
            if table is None:
                raise InvalidDistribution("A custom-table response needs a table of f(+1, θ) values")
            values = np.asarray(table, dtype=float)
            if values.ndim != 1 or len(values) < 8:
                raise InvalidDistribution("A response table needs at least 8 samples on a uniform grid")
            if np.any(values < 0.0) or np.any(values > 1.0):
                raise InvalidDistribution("Response table values must lie in [0, 1]")
            self.table = values
            grid = np.linspace(0.0, TWO_PI, len(values) + 1)
            self._spline = CubicSpline(grid, np.append(values, values[0]), bc_type='periodic')

    @classmethod
    def malus(cls) -> 'ResponseFunction':
        return cls('malus-classical')

    @classmethod
    def from_function(cls, plus, n: int = 4096) -> 'ResponseFunction':
        grid = np.arange(n) * (TWO_PI / n)
        return cls('custom-table', np.clip(plus(grid), 0.0, 1.0))

    def plus(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.kind == 'malus-classical':
            return np.cos(theta) ** 2
        return np.clip(self._spline(np.mod(theta, TWO_PI)), 0.0, 1.0)

    def __call__(self, outcome: int, theta) -> np.ndarray:
        plus = self.plus(theta)
        return plus if require_outcome(outcome) == 1 else 1.0 - plus

    def describe(self):
        return {'kind': self.kind, 'table_size': None if self.table is None else len(self.table)}
