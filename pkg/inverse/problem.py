import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from dynamics.distributions import MIN_BINS, angle_nodes
from geometry.helper_functions import TWO_PI, wrap_angle

from .exceptions import InvalidInverseProblem

logger = logging.getLogger(__name__)

TARGET_MODES = ('dense', 'directions', 'explicit')


@dataclass(frozen=True)
class InverseProblem:
    """Find P(ψ₋) on ``bins`` nodes with ½ − cos θ_ab = ∫ P(ψ₋) cos²(θ_ab + ψ₋ + π) dψ₋ at every target."""

    targets: Tuple[float, ...]
    bins: Optional[int] = None
    regularization: float = 0.0
    mode: str = 'explicit'

    def __post_init__(self):
        targets = tuple(float(angle) for angle in self.targets)
        if not targets:
            raise InvalidInverseProblem("An inverse problem needs at least one target angle")
        if not all(math.isfinite(angle) for angle in targets):
            raise InvalidInverseProblem("Target angles must be finite")
        object.__setattr__(self, 'targets', targets)
        bins = int(self.bins or settings.INVERSE_BINS)
        if bins < MIN_BINS:
            raise InvalidInverseProblem(f"The unknown density needs at least {MIN_BINS} bins, got {bins}")
        object.__setattr__(self, 'bins', bins)
        if self.regularization < 0.0:
            raise InvalidInverseProblem("Regularization must be nonnegative")
        if self.mode not in TARGET_MODES:
            raise InvalidInverseProblem(f"Unknown target mode '{self.mode}'")

    @classmethod
    def dense(cls, size: int, **kwargs) -> 'InverseProblem':
        if size < 1:
            raise InvalidInverseProblem("A dense target grid needs at least one angle")
        return cls(tuple(angle_nodes(size)), mode='dense', **kwargs)

    @classmethod
    def from_directions(cls, directions_A: Sequence[float], directions_B: Sequence[float],
                        **kwargs) -> 'InverseProblem':
        """Every θ_a − θ_b the configured measurement directions can produce, duplicates removed."""
        differences = sorted({round(wrap_angle(a - b), 12) for a in directions_A for b in directions_B})
        return cls(tuple(differences), mode='directions', **kwargs)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.bins

    @property
    def nodes(self) -> np.ndarray:
        return angle_nodes(self.bins)

    def target_values(self) -> np.ndarray:
        return 0.5 - np.cos(np.asarray(self.targets))

    def kernel(self, nodes: Optional[np.ndarray] = None) -> np.ndarray:
        """K[k, j] = cos²(θ_ab,k + ψ_j + π), acting on bin masses; ``nodes`` defaults to the problem grid."""
        nodes = self.nodes if nodes is None else np.asarray(nodes, dtype=float)
        return np.cos(np.asarray(self.targets)[:, None] + nodes[None, :] + math.pi) ** 2

    def as_dict(self) -> Dict[str, Any]:
        return {
            'mode': self.mode,
            'targets': list(self.targets),
            'bins': self.bins,
            'regularization': self.regularization,
        }


def assemble_system(problem: InverseProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix and right-hand side acting on the density values, normalization row last."""
    spacing = problem.spacing
    matrix = np.vstack([problem.kernel() * spacing, np.full((1, problem.bins), spacing)])
    rhs = np.append(problem.target_values(), 1.0)
    return matrix, rhs
