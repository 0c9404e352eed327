import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import InvalidInverseProblem

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
CIRCLE_SCAN_POINTS = 720


@dataclass(frozen=True)
class FeasibilityReport:
    """Moment-space view of the matching equation: only (C₂, S₂) = E[(cos 2ψ₋, sin 2ψ₋)] enter."""

    targets: Tuple[float, ...]
    constraints: List[Dict[str, float]] = field(repr=False)
    moments: Tuple[float, float]
    lower_bound: float
    on_boundary: bool

    @property
    def feasible(self) -> bool:
        return self.lower_bound <= FEASIBILITY_TOL

    def as_dict(self) -> Dict[str, Any]:
        return {
            'targets': list(self.targets),
            'constraints': self.constraints,
            'C2': self.moments[0],
            'S2': self.moments[1],
            'feasible': self.feasible,
            'lower_bound': self.lower_bound,
            'on_boundary': self.on_boundary,
        }


def moment_system(targets: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Rows (½cos 2θ, −½sin 2θ) and right-hand sides −cos θ.

    cos²(θ + ψ + π) = ½ + ½cos(2θ + 2ψ), so the matching equation at θ reads
    −cos θ = ½(C₂ cos 2θ − S₂ sin 2θ).
    """
    theta = np.asarray(targets, dtype=float)
    matrix = np.column_stack([0.5 * np.cos(2.0 * theta), -0.5 * np.sin(2.0 * theta)])
    return matrix, -np.cos(theta)


def _rms(matrix: np.ndarray, rhs: np.ndarray, x: np.ndarray) -> float:
    misfit = matrix @ x - rhs
    return float(math.sqrt(misfit @ misfit / len(misfit)))


def _best_on_circle(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    def misfit(phi: float) -> float:
        return _rms(matrix, rhs, np.array([math.cos(phi), math.sin(phi)]))

    scan = np.linspace(0.0, 2.0 * math.pi, CIRCLE_SCAN_POINTS, endpoint=False)
    start = scan[int(np.argmin([misfit(phi) for phi in scan]))]
    width = 2.0 * math.pi / CIRCLE_SCAN_POINTS
    result = minimize_scalar(misfit, bounds=(start - width, start + width), method='bounded',
                             options={'xatol': 1e-12})
    return np.array([math.cos(result.x), math.sin(result.x)])


def fourier_feasibility(targets: Sequence[float]) -> FeasibilityReport:
    """Least-squares misfit of the matching equation over the disc C₂² + S₂² ≤ 1 of attainable moments."""
    targets = tuple(float(angle) for angle in targets)
    if not targets:
        raise InvalidInverseProblem("Feasibility needs at least one target angle")
    matrix, rhs = moment_system(targets)
    constraints = [{'theta_ab': theta, 'C2_coefficient': float(row[0]), 'S2_coefficient': float(row[1]),
                    'rhs': float(b)} for theta, row, b in zip(targets, matrix, rhs)]

    # the minimum-norm least-squares point meets the disc whenever any minimiser does
    x = np.linalg.lstsq(matrix, rhs, rcond=None)[0]
    on_boundary = bool(np.linalg.norm(x) > 1.0 + 1e-12)
    if on_boundary:
        x = _best_on_circle(matrix, rhs)
    bound = _rms(matrix, rhs, x)
    logger.info(f"Moment analysis of {len(targets)} targets: misfit floor {bound:.3e} at "
                f"C2={x[0]:.6f}, S2={x[1]:.6f}")
    return FeasibilityReport(targets, constraints, (float(x[0]), float(x[1])), bound, on_boundary)
