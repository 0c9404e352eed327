import logging
from typing import Callable, Optional

import numpy as np
from django.conf import settings
from scipy.integrate import simpson

from geometry.helper_functions import TWO_PI

from .distributions import AngleDistribution
from .exceptions import ResolutionTooLow

logger = logging.getLogger(__name__)


def resolve_nodes(nodes: Optional[int] = None) -> int:
    nodes = int(nodes or settings.QUADRATURE_NODES)
    if nodes < settings.QUADRATURE_MIN_NODES:
        raise ResolutionTooLow(f"{nodes} quadrature nodes requested, at least "
                               f"{settings.QUADRATURE_MIN_NODES} are needed")
    # composite Simpson wants an even number of panels
    return nodes + (nodes % 2)


def periodic_simpson(integrand: Callable[[np.ndarray], np.ndarray], nodes: Optional[int] = None) -> float:
    """(1/2π)∫₀^{2π} integrand(θ) dθ by composite Simpson on a closed uniform grid."""
    n = resolve_nodes(nodes)
    grid = np.linspace(0.0, TWO_PI, n + 1)
    return float(simpson(integrand(grid), x=grid) / TWO_PI)


def distribution_average(integrand: Callable[[np.ndarray], np.ndarray], dist: AngleDistribution,
                         nodes: Optional[int] = None) -> float:
    """E[integrand(θ)] under ``dist``.

    A uniform distribution is integrated with composite Simpson at ``nodes``; any other binned
    density is summed bin mass against the integrand at its own nodes, which is exact for point masses.
    """
    nodes = resolve_nodes(nodes)
    if dist.is_uniform:
        return periodic_simpson(integrand, nodes)
    support = dist.support()
    return float(dist.masses[support] @ integrand(dist.nodes[support]))
