import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from dynamics.distributions import AngleDistribution, angle_nodes
from dynamics.probabilities import chsh_value, correlation, simp_table

logger = logging.getLogger(__name__)

STANDARD_ANGLES = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)
CLASSICAL_BOUND = 2.0
MAX_SWEEPS = 50


def chsh_statistic(psi_dist: AngleDistribution, angles: Sequence[float] = STANDARD_ANGLES) -> float:
    """S for the angles (θ_a, θ_a', θ_b, θ_b') under the simplified dynamics."""
    theta_a, theta_a_prime, theta_b, theta_b_prime = angles

    def e(first: float, second: float) -> float:
        return correlation(simp_table(psi_dist, first - second))

    return chsh_value(e(theta_a, theta_b), e(theta_a, theta_b_prime),
                      e(theta_a_prime, theta_b), e(theta_a_prime, theta_b_prime))


@dataclass
class ChshMaximum:
    value: float
    angles: Tuple[float, float, float, float]
    psi: float
    bins: int
    restarts: int

    def as_dict(self) -> Dict[str, Any]:
        return {
            'S': self.value,
            'angles': list(self.angles),
            'psi_point_mass': self.psi,
            'bins': self.bins,
            'restarts': self.restarts,
            'exceeds_classical_bound': self.value > CLASSICAL_BOUND,
        }


def _point_mass_chsh(angles: Sequence[float], psi: np.ndarray) -> np.ndarray:
    # E(θ_ab) = ½cos(2θ_ab + 2ψ₋) for a point mass at ψ₋
    a, a_prime, b, b_prime = angles

    def e(first, second):
        return 0.5 * np.cos(2.0 * (first - second) + 2.0 * psi)

    return np.abs(e(a, b) - e(a, b_prime)) + np.abs(e(a_prime, b) + e(a_prime, b_prime))


def maximize_chsh(bins: int = 64, restarts: int = 8, seed: Optional[int] = 0) -> ChshMaximum:
    """Coordinate ascent on S over the four angles and the binned P(ψ₋).

    S is convex in the density, so the density step only needs to compare point masses.
    """
    rng = np.random.Generator(np.random.Philox(key=seed or 0))
    nodes = angle_nodes(bins)
    best: Optional[ChshMaximum] = None
    for restart in range(restarts):
        angles = list(rng.uniform(0.0, math.pi, size=4))
        psi = float(nodes[rng.integers(bins)])
        value = -math.inf
        for _ in range(MAX_SWEEPS):
            previous = value
            for index in range(4):
                def negative(theta, index=index):
                    trial = list(angles)
                    trial[index] = theta
                    return -float(_point_mass_chsh(trial, np.array([psi]))[0])

                centre = angles[index]
                result = minimize_scalar(negative, bounds=(centre - math.pi / 2, centre + math.pi / 2),
                                         method='bounded', options={'xatol': 1e-10})
                if -result.fun > -negative(centre):
                    angles[index] = float(result.x)
            scores = _point_mass_chsh(angles, nodes)
            psi = float(nodes[int(np.argmax(scores))])
            value = float(scores.max())
            if value - previous < 1e-12:
                break
        logger.debug(f"Restart {restart}: S = {value:.12f}")
        if best is None or value > best.value:
            best = ChshMaximum(value, tuple(angles), psi, bins, restarts)

    # report S from the full outcome tables
    best.value = chsh_statistic(AngleDistribution.point_mass(best.psi, bins), best.angles)
    logger.info(f"CHSH maximum over {restarts} restarts: S = {best.value:.9f}")
    return best
