import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from curvedchsh.exceptions import CurvedChshError
from dynamics.distributions import AngleDistribution, JointAngleDistribution
from geometry.spacetimes import build_spacetime
from scenario.angles import HolonomyDecomposition, decompose_holonomy
from scenario.builder import build_geometry
from scenario.config import ExperimentConfig

from .exceptions import InvalidSweep, TooManyFailures

logger = logging.getLogger(__name__)

SCHEME = 'weak-field-jitter/v1'
MIN_DRAWS = 100
PERTURBABLE_KINDS = ('minkowski', 'weak-field')
DEFAULT_CENTER = (1.5, 0.0, 0.0)
DEFAULT_R_MIN = 0.5


@dataclass(frozen=True)
class PerturbationSpec:
    """Each draw is a weak-field bump with mass M + amplitude·z₀ (clipped at 0) centred at c + jitter·(z₁, z₂, z₃).

    The z are standard normals from the Philox stream keyed by (seed, gridpoint, draw).
    """

    amplitude: float = 0.0
    position_jitter: float = 0.0
    n_draws: int = MIN_DRAWS
    r_min: Optional[float] = None
    center: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.amplitude < 0.0 or self.position_jitter < 0.0:
            raise InvalidSweep("Perturbation amplitude and position jitter must be nonnegative")
        if self.n_draws < MIN_DRAWS:
            raise InvalidSweep(f"An empirical ψ₋ distribution needs at least {MIN_DRAWS} draws")

    @classmethod
    def from_dict(cls, block: Dict[str, Any]) -> 'PerturbationSpec':
        return cls(
            amplitude=float(block.get('amplitude', 0.0)),
            position_jitter=float(block.get('position_jitter', 0.0)),
            n_draws=int(block.get('n_draws', MIN_DRAWS)),
            r_min=block.get('r_min'),
            center=tuple(block['center']) if block.get('center') is not None else None,
        )

    def as_dict(self) -> Dict[str, Any]:
        return {
            'scheme': SCHEME,
            'amplitude': self.amplitude,
            'position_jitter': self.position_jitter,
            'n_draws': self.n_draws,
            'r_min': self.r_min,
            'center': list(self.center) if self.center is not None else None,
        }


@dataclass
class EmpiricalPsi:
    distribution: AngleDistribution
    joint: JointAngleDistribution
    theta_A2: AngleDistribution
    theta_B2: AngleDistribution
    samples: np.ndarray = field(repr=False)
    failures: int
    n_draws: int

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def stderr(self) -> float:
        if len(self.samples) < 2:
            return 0.0
        return float(self.samples.std(ddof=1) / math.sqrt(len(self.samples)))

    def as_dict(self) -> Dict[str, Any]:
        return {
            'scheme': SCHEME,
            'n_draws': self.n_draws,
            'failures': self.failures,
            'psi_mean': self.mean,
            'psi_stderr': self.stderr,
            'psi_distribution': self.distribution.as_dict(),
        }


def draw_generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def perturbed_spec(base: Dict[str, Any], perturbation: PerturbationSpec, z: np.ndarray) -> Dict[str, Any]:
    kind = base.get('kind', 'minkowski')
    if kind not in PERTURBABLE_KINDS:
        raise InvalidSweep(f"Perturbations are defined for {PERTURBABLE_KINDS}, not '{kind}'")
    mass = float(base.get('mass', 0.0)) if kind == 'weak-field' else 0.0
    center = np.asarray(perturbation.center or base.get('center') or DEFAULT_CENTER, dtype=float)
    r_min = perturbation.r_min or base.get('r_min') or DEFAULT_R_MIN
    spec = {key: value for key, value in base.items() if key not in ('mass', 'center', 'r_min')}
    spec.update({
        'kind': 'weak-field',
        'mass': max(0.0, mass + perturbation.amplitude * float(z[0])),
        'r_min': float(r_min),
        'center': (center + perturbation.position_jitter * z[1:4]).tolist(),
    })
    return spec


def _holonomy(spec: Dict[str, Any], config: ExperimentConfig) -> HolonomyDecomposition:
    spacetime = build_spacetime(spec)
    return decompose_holonomy(spacetime, build_geometry(spacetime, config))


def empirical_psi_distribution(base: Dict[str, Any], config: ExperimentConfig, perturbation: PerturbationSpec,
                               seed: int, gridpoint: int = 0, bins: int = 64,
                               threads: Optional[int] = None) -> EmpiricalPsi:
    """Binned ψ₋ = θ_A1 − θ_B1 over an ensemble of randomly perturbed geometries."""
    if seed is None:
        raise InvalidSweep("Perturbation ensembles need a seed")
    threads = max(1, int(threads or settings.DEFAULT_THREADS))
    specs = []
    for draw in range(perturbation.n_draws):
        z = draw_generator(seed, gridpoint, draw).standard_normal(4)
        specs.append(perturbed_spec(base, perturbation, z))

    # identical draws (zero amplitude and jitter) share one geometry
    unique: Dict[str, Dict[str, Any]] = {repr(sorted(spec.items())): spec for spec in specs}

    def work(spec: Dict[str, Any]):
        try:
            return _holonomy(spec, config)
        except (CurvedChshError, ValueError) as e:
            logger.debug(f"Perturbed geometry {spec} failed: {e}")
            return e

    with ThreadPoolExecutor(max_workers=threads) as executor:
        built = dict(zip(unique, executor.map(work, unique.values())))

    results: List[HolonomyDecomposition] = []
    failures = 0
    for spec in specs:
        outcome = built[repr(sorted(spec.items()))]
        if isinstance(outcome, Exception):
            failures += 1
        else:
            results.append(outcome)

    if failures > settings.SWEEP_MAX_FAILURE_FRACTION * perturbation.n_draws:
        raise TooManyFailures(f"{failures} of {perturbation.n_draws} perturbed geometries failed to build")
    if failures:
        logger.warning(f"Skipped {failures} of {perturbation.n_draws} perturbed geometries")

    theta_A1 = np.array([result.theta_A1 for result in results])
    theta_B1 = np.array([result.theta_B1 for result in results])
    psi = np.array([result.psi_minus for result in results])
    empirical = EmpiricalPsi(
        distribution=AngleDistribution.from_samples(psi, bins),
        joint=JointAngleDistribution.from_samples(theta_A1, theta_B1, bins),
        theta_A2=AngleDistribution.from_samples([result.theta_A2 for result in results], bins),
        theta_B2=AngleDistribution.from_samples([result.theta_B2 for result in results], bins),
        samples=psi,
        failures=failures,
        n_draws=perturbation.n_draws,
    )
    logger.info(f"Empirical ψ₋ from {len(results)} geometries ({len(unique)} distinct): "
                f"mean {empirical.mean:.3e} ± {empirical.stderr:.1e}")
    return empirical
