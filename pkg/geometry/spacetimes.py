import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
from django.conf import settings
from scipy.interpolate import RegularGridInterpolator

from .exceptions import ChartEscape, DegenerateMetric
from .helper_functions import as_point

logger = logging.getLogger(__name__)

DIMENSION = 4
ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
SYMMETRY_TOL = 1e-12
DETERMINANT_TOL = 1e-10

CHRISTOFFEL_MODES = ('closed-form', 'central-difference')
GRID_HEADER = [f'x{i}' for i in range(4)] + [f'g{a}{b}' for a in range(4) for b in range(4)]


class Spacetime:
    """A Lorentzian metric of signature (3,1) on a single coordinate chart."""

    builtin_id = 'custom'
    has_closed_form = False

    def __init__(self, christoffel_mode: str = 'closed-form', fd_step: Optional[float] = None,
                 chart_bound: Optional[float] = None):
        if christoffel_mode not in CHRISTOFFEL_MODES:
            raise ValueError(f"Unknown christoffel_mode '{christoffel_mode}'")
        if christoffel_mode == 'closed-form' and not self.has_closed_form:
            logger.debug(f"{self.builtin_id} has no closed-form connection, using central differences")
            christoffel_mode = 'central-difference'
        self.christoffel_mode = christoffel_mode
        self.fd_step = float(fd_step or settings.GEOMETRY_FD_STEP)
        self.chart_bound = float(chart_bound or settings.GEOMETRY_CHART_BOUND)

    # metric

    def _metric(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def metric(self, x) -> np.ndarray:
        return self._metric(as_point(x))

    def checked_metric(self, x) -> np.ndarray:
        """Metric at x, verified symmetric and non-degenerate."""
        g = self.metric(x)
        if np.max(np.abs(g - g.T)) > SYMMETRY_TOL:
            raise DegenerateMetric(f"Metric is not symmetric at {list(np.round(x, 12))}")
        det = np.linalg.det(g)
        if abs(det) <= DETERMINANT_TOL:
            raise DegenerateMetric(f"Metric is degenerate at {list(np.round(x, 12))} (det={det:.3e})")
        return g

    def inner(self, x, v, w) -> float:
        return float(np.asarray(v) @ self.metric(x) @ np.asarray(w))

    def in_chart(self, x: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(x)) and np.max(np.abs(x)) <= self.chart_bound)

    def require_in_chart(self, x: np.ndarray, label: str = 'point') -> None:
        if not self.in_chart(x):
            raise ChartEscape(f"{label} {list(np.round(x, 6))} lies outside the {self.builtin_id} chart")

    # connection

    def _closed_form_christoffel(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def christoffel(self, x: np.ndarray) -> np.ndarray:
        if self.christoffel_mode == 'closed-form':
            return self._closed_form_christoffel(x)
        return self.central_difference_christoffel(x)

    def central_difference_christoffel(self, x, h: Optional[float] = None) -> np.ndarray:
        h = float(h or self.fd_step)
        x = as_point(x)
        ginv = np.linalg.inv(self.checked_metric(x))
        # dg[c, a, b] = ∂_c g_ab
        dg = np.empty((DIMENSION, DIMENSION, DIMENSION))
        for c in range(DIMENSION):
            shift = np.zeros(DIMENSION)
            shift[c] = h
            dg[c] = (self._metric(x + shift) - self._metric(x - shift)) / (2.0 * h)
        lowered = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
        return 0.5 * np.einsum('mc,cab->mab', ginv, lowered)

    def describe(self) -> Dict[str, Any]:
        return {
            'builtin_id': self.builtin_id,
            'christoffel_mode': self.christoffel_mode,
            'chart_bound': self.chart_bound,
        }


class Minkowski(Spacetime):
    builtin_id = 'minkowski'
    has_closed_form = True

    def _metric(self, x: np.ndarray) -> np.ndarray:
        return ETA.copy()

    def _closed_form_christoffel(self, x: np.ndarray) -> np.ndarray:
        return np.zeros((DIMENSION, DIMENSION, DIMENSION))


class WeakField(Spacetime):
    """Linearised static field of a Plummer-softened mass at a fixed spatial centre."""

    builtin_id = 'weak-field'
    has_closed_form = True

    def __init__(self, mass: float, r_min: float, center: Sequence[float] = (3.0, 0.0, 0.0), **kwargs):
        super().__init__(**kwargs)
        if mass < 0.0:
            raise ValueError("mass must be non-negative")
        if r_min <= 0.0:
            raise ValueError("r_min must be positive")
        if 2.0 * mass / r_min >= 1.0:
            raise ValueError(f"2M/r_min = {2.0 * mass / r_min:.3f} leaves the weak-field regime")
        self.mass = float(mass)
        self.r_min = float(r_min)
        self.center = np.asarray(center, dtype=float).reshape(3)

    def potential(self, x: np.ndarray) -> float:
        offset = x[1:] - self.center
        return -self.mass / math.sqrt(float(offset @ offset) + self.r_min ** 2)

    def potential_gradient(self, x: np.ndarray) -> np.ndarray:
        offset = x[1:] - self.center
        softened = float(offset @ offset) + self.r_min ** 2
        return self.mass * offset / softened ** 1.5

    def _metric(self, x: np.ndarray) -> np.ndarray:
        phi = self.potential(x)
        return np.diag([-(1.0 + 2.0 * phi), 1.0 - 2.0 * phi, 1.0 - 2.0 * phi, 1.0 - 2.0 * phi])

    def _closed_form_christoffel(self, x: np.ndarray) -> np.ndarray:
        phi = self.potential(x)
        grad = self.potential_gradient(x)
        gamma = np.zeros((DIMENSION, DIMENSION, DIMENSION))
        gamma[0, 0, 1:] = grad / (1.0 + 2.0 * phi)
        gamma[0, 1:, 0] = gamma[0, 0, 1:]
        gamma[1:, 0, 0] = grad / (1.0 - 2.0 * phi)
        eye = np.eye(3)
        spatial = (np.einsum('ik,j->ijk', eye, grad)
                   + np.einsum('ij,k->ijk', eye, grad)
                   - np.einsum('jk,i->ijk', eye, grad))
        gamma[1:, 1:, 1:] = -spatial / (1.0 - 2.0 * phi)
        return gamma

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info.update({'mass': self.mass, 'r_min': self.r_min, 'center': self.center.tolist()})
        return info


class ProductSphere(Spacetime):
    """Flat time × round 2-sphere of radius R × line, in coordinates (t, θ, φ, z)."""

    builtin_id = 'product-sphere'
    has_closed_form = True

    def __init__(self, radius: float = 1.0, **kwargs):
        super().__init__(**kwargs)
        if radius <= 0.0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def _metric(self, x: np.ndarray) -> np.ndarray:
        r2 = self.radius ** 2
        return np.diag([-1.0, r2, r2 * math.sin(x[1]) ** 2, 1.0])

    def in_chart(self, x: np.ndarray) -> bool:
        return super().in_chart(x) and 0.0 < x[1] < math.pi

    def _closed_form_christoffel(self, x: np.ndarray) -> np.ndarray:
        sin_t, cos_t = math.sin(x[1]), math.cos(x[1])
        if self.radius ** 4 * sin_t ** 2 <= DETERMINANT_TOL:
            raise DegenerateMetric(f"Sphere chart degenerates at θ = {x[1]:.3e}")
        gamma = np.zeros((DIMENSION, DIMENSION, DIMENSION))
        gamma[1, 2, 2] = -sin_t * cos_t
        gamma[2, 1, 2] = gamma[2, 2, 1] = cos_t / sin_t
        return gamma

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info['radius'] = self.radius
        return info


class GridSpacetime(Spacetime):
    """Metric coefficients tabulated on a regular grid, multilinearly interpolated."""

    builtin_id = 'custom'

    def __init__(self, axes: Sequence[np.ndarray], values: np.ndarray, source: str = '', **kwargs):
        kwargs['christoffel_mode'] = 'central-difference'
        super().__init__(**kwargs)
        self.axes = tuple(np.asarray(axis, dtype=float) for axis in axes)
        shape = tuple(len(axis) for axis in self.axes)
        values = np.asarray(values, dtype=float).reshape(shape + (DIMENSION * DIMENSION,))
        self.lower = np.array([axis[0] for axis in self.axes])
        self.upper = np.array([axis[-1] for axis in self.axes])
        self.source = source
        # fill_value=None extrapolates linearly, which the derivative stencil needs at the edges
        self._interpolator = RegularGridInterpolator(self.axes, values, method='linear',
                                                     bounds_error=False, fill_value=None)

    @classmethod
    def from_csv(cls, path, **kwargs) -> 'GridSpacetime':
        path = Path(path)
        with path.open(newline='') as handle:
            reader = csv.reader(handle)
            header = [column.strip() for column in next(reader)]
            if header != GRID_HEADER:
                raise ValueError(f"Grid file {path} must have header {','.join(GRID_HEADER)}")
            rows = np.array([[float(cell) for cell in row] for row in reader if row])
        if rows.size == 0:
            raise ValueError(f"Grid file {path} has no rows")

        axes = [np.unique(rows[:, i]) for i in range(DIMENSION)]
        if any(len(axis) < 2 for axis in axes):
            raise ValueError("Every grid axis needs at least two nodes")
        shape = tuple(len(axis) for axis in axes)
        if rows.shape[0] != int(np.prod(shape)):
            raise ValueError(f"Grid file {path} is not a complete regular grid ({rows.shape[0]} rows for shape {shape})")

        values = np.full(shape + (DIMENSION * DIMENSION,), np.nan)
        index = tuple(np.searchsorted(axes[i], rows[:, i]) for i in range(DIMENSION))
        values[index] = rows[:, DIMENSION:]
        if np.isnan(values).any():
            raise ValueError(f"Grid file {path} has duplicate or missing nodes")
        logger.info(f"Loaded metric grid {shape} from {path}")
        return cls(axes, values, source=str(path), **kwargs)

    def _metric(self, x: np.ndarray) -> np.ndarray:
        return self._interpolator(x[None, :])[0].reshape(DIMENSION, DIMENSION)

    def in_chart(self, x: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(x)) and np.all(x >= self.lower) and np.all(x <= self.upper))

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info.update({'grid_file': self.source, 'lower': self.lower.tolist(), 'upper': self.upper.tolist()})
        return info


def christoffel(spacetime: Spacetime, point) -> np.ndarray:
    """Γ^μ_αβ at a point, after checking the metric there."""
    x = as_point(point)
    spacetime.checked_metric(x)
    return spacetime.christoffel(x)


def build_spacetime(spec: Dict[str, Any]) -> Spacetime:
    """Instantiate a spacetime from a validated ``spacetime`` config block."""
    kind = spec.get('kind', 'minkowski')
    common = {
        'christoffel_mode': spec.get('christoffel_mode', 'closed-form'),
        'fd_step': spec.get('fd_step'),
        'chart_bound': spec.get('chart_bound'),
    }
    if kind == 'minkowski':
        return Minkowski(**common)
    if kind == 'weak-field':
        return WeakField(spec['mass'], spec['r_min'], spec.get('center', (3.0, 0.0, 0.0)), **common)
    if kind == 'product-sphere':
        return ProductSphere(spec.get('radius', 1.0), **common)
    if kind == 'custom':
        common.pop('christoffel_mode')
        return GridSpacetime.from_csv(spec['grid_file'], **common)
    raise ValueError(f"Unknown spacetime kind '{kind}'")
