import logging
import math
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from geometry.helper_functions import TWO_PI, wrap_angle

from .exceptions import InvalidDistribution

logger = logging.getLogger(__name__)

MIN_BINS = 8
NORMALIZATION_TOL = 1e-10


def angle_nodes(n: int) -> np.ndarray:
    return np.arange(n) * (TWO_PI / n)


def nearest_node(angle, n: int):
    """Index of the grid node closest to ``angle`` on an n-node circle."""
    return np.rint(np.mod(angle, TWO_PI) / (TWO_PI / n)).astype(int) % n


def snap(angle: float, n: int) -> Tuple[int, float]:
    """Nearest node index and the signed residual that puts it back on ``angle``, |residual| ≤ π/n."""
    index = int(nearest_node(angle, n))
    return index, math.remainder(angle - index * TWO_PI / n, TWO_PI)


class AngleDistribution:
    """Binned density over [0, 2π). Bin j is centred on the node offset + j·2π/N and carries mass density_j·2π/N.

    ``offset`` shifts the whole grid by less than half a bin, so a point mass sits on its exact angle.
    """

    def __init__(self, density: Sequence[float], offset: float = 0.0):
        density = np.array(density, dtype=float)
        if density.ndim != 1 or len(density) < MIN_BINS:
            raise InvalidDistribution(f"An angle distribution needs at least {MIN_BINS} bins")
        if not np.all(np.isfinite(density)) or np.any(density < 0.0):
            raise InvalidDistribution("Angle densities must be finite and nonnegative")
        total = float(density.sum() * (TWO_PI / len(density)))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidDistribution(f"Angle density integrates to {total:.12f}, not 1")
        self.density = density
        self.density.setflags(write=False)
        self.offset = float(offset)

    @property
    def n(self) -> int:
        return len(self.density)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def nodes(self) -> np.ndarray:
        return angle_nodes(self.n) + self.offset

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.spacing

    @property
    def is_uniform(self) -> bool:
        return bool(np.ptp(self.density) <= NORMALIZATION_TOL)

    @classmethod
    def from_masses(cls, masses: Sequence[float], offset: float = 0.0) -> 'AngleDistribution':
        masses = np.asarray(masses, dtype=float)
        total = masses.sum()
        if total <= 0.0:
            raise InvalidDistribution("Cannot normalise a distribution with no mass")
        return cls(masses / total / (TWO_PI / len(masses)), offset)

    @classmethod
    def uniform(cls, n: int = 64) -> 'AngleDistribution':
        return cls(np.full(n, 1.0 / TWO_PI))

    @classmethod
    def point_mass(cls, angle: float, n: int = 64) -> 'AngleDistribution':
        """Unit mass on the node nearest ``angle``, with the grid shifted so that node is exactly ``angle``."""
        index, offset = snap(angle, n)
        masses = np.zeros(n)
        masses[index] = 1.0
        return cls.from_masses(masses, offset)

    @classmethod
    def from_samples(cls, samples: Sequence[float], n: int = 64) -> 'AngleDistribution':
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            raise InvalidDistribution("Cannot bin an empty sample")
        counts = np.bincount(nearest_node(samples, n), minlength=n)
        return cls.from_masses(counts.astype(float))

    @classmethod
    def from_function(cls, density: Callable[[np.ndarray], np.ndarray], n: int = 64) -> 'AngleDistribution':
        return cls.from_masses(np.asarray(density(angle_nodes(n)), dtype=float))

    def expectation(self, values) -> float:
        return float(self.masses @ np.asarray(values, dtype=float))

    def moments(self, order: int = 2) -> Tuple[float, float]:
        """(E[cos kθ], E[sin kθ]) for k = ``order``."""
        nodes = self.nodes
        return self.expectation(np.cos(order * nodes)), self.expectation(np.sin(order * nodes))

    def circular_mean(self) -> float:
        c, s = self.moments(1)
        return wrap_angle(math.atan2(s, c))

    def support(self, tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.masses > tol)

    def as_dict(self) -> Dict[str, Any]:
        return {'bins': self.n, 'offset': self.offset, 'nodes': self.nodes.tolist(),
                'density': self.density.tolist()}


class JointAngleDistribution:
    """Binned density over (θ_A1, θ_B1) on an N×N node grid; each axis may be shifted by its own offset."""

    def __init__(self, density, offset_A: float = 0.0, offset_B: float = 0.0):
        density = np.array(density, dtype=float)
        if density.ndim != 2 or density.shape[0] != density.shape[1] or density.shape[0] < MIN_BINS:
            raise InvalidDistribution(f"A joint distribution needs a square grid of at least {MIN_BINS} bins")
        if not np.all(np.isfinite(density)) or np.any(density < 0.0):
            raise InvalidDistribution("Joint densities must be finite and nonnegative")
        total = float(density.sum() * (TWO_PI / density.shape[0]) ** 2)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidDistribution(f"Joint density integrates to {total:.12f}, not 1")
        self.density = density
        self.density.setflags(write=False)
        self.offset_A = float(offset_A)
        self.offset_B = float(offset_B)

    @property
    def n(self) -> int:
        return self.density.shape[0]

    @property
    def nodes_A(self) -> np.ndarray:
        return angle_nodes(self.n) + self.offset_A

    @property
    def nodes_B(self) -> np.ndarray:
        return angle_nodes(self.n) + self.offset_B

    @property
    def masses(self) -> np.ndarray:
        return self.density * (TWO_PI / self.n) ** 2

    @classmethod
    def from_masses(cls, masses, offset_A: float = 0.0, offset_B: float = 0.0) -> 'JointAngleDistribution':
        masses = np.asarray(masses, dtype=float)
        total = masses.sum()
        if total <= 0.0:
            raise InvalidDistribution("Cannot normalise a joint distribution with no mass")
        return cls(masses / total / (TWO_PI / masses.shape[0]) ** 2, offset_A, offset_B)

    @classmethod
    def uniform(cls, n: int = 64) -> 'JointAngleDistribution':
        return cls.from_masses(np.ones((n, n)))

    @classmethod
    def point_mass(cls, theta_A1: float, theta_B1: float, n: int = 64) -> 'JointAngleDistribution':
        index_A, offset_A = snap(theta_A1, n)
        index_B, offset_B = snap(theta_B1, n)
        masses = np.zeros((n, n))
        masses[index_A, index_B] = 1.0
        return cls.from_masses(masses, offset_A, offset_B)

    @classmethod
    def product(cls, first: AngleDistribution, second: AngleDistribution) -> 'JointAngleDistribution':
        if first.n != second.n:
            raise InvalidDistribution(f"Marginals on different grids ({first.n} and {second.n} bins)")
        return cls.from_masses(np.outer(first.masses, second.masses), first.offset, second.offset)

    @classmethod
    def from_psi(cls, psi: AngleDistribution, theta_B1: Optional[AngleDistribution] = None) -> 'JointAngleDistribution':
        """Concentrate mass on θ_A1 − θ_B1 = ψ₋, with θ_B1 uniform unless given."""
        n = psi.n
        b_masses = np.full(n, 1.0 / n) if theta_B1 is None else theta_B1.masses
        offset_B = 0.0 if theta_B1 is None else theta_B1.offset
        if len(b_masses) != n:
            raise InvalidDistribution("θ_B1 marginal must share the ψ₋ grid")
        i, j = np.indices((n, n))
        return cls.from_masses(psi.masses[(i - j) % n] * b_masses[j], psi.offset + offset_B, offset_B)

    @classmethod
    def from_samples(cls, theta_A1, theta_B1, n: int = 64) -> 'JointAngleDistribution':
        flat = nearest_node(theta_A1, n) * n + nearest_node(theta_B1, n)
        counts = np.bincount(np.asarray(flat).reshape(-1), minlength=n * n).reshape(n, n)
        return cls.from_masses(counts.astype(float))

    def marginal_A(self) -> AngleDistribution:
        return AngleDistribution.from_masses(self.masses.sum(axis=1), self.offset_A)

    def marginal_B(self) -> AngleDistribution:
        return AngleDistribution.from_masses(self.masses.sum(axis=0), self.offset_B)

    def psi_marginal(self) -> AngleDistribution:
        """Distribution of θ_A1 − θ_B1 on the same grid."""
        i, j = np.indices(self.masses.shape)
        masses = np.bincount(((i - j) % self.n).ravel(), weights=self.masses.ravel(), minlength=self.n)
        return AngleDistribution.from_masses(masses, self.offset_A - self.offset_B)

    def as_dict(self) -> Dict[str, Any]:
        return {'bins': self.n, 'offsets': [self.offset_A, self.offset_B], 'density': self.density.tolist()}
