import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from django.conf import settings

from scenario.angles import B_SIDE_OFFSET

from .distributions import AngleDistribution, JointAngleDistribution
from .exceptions import ResolutionTooLow, SeedRequired
from .probabilities import OutcomeProbabilities
from .response import ResponseFunction

logger = logging.getLogger(__name__)

MIN_SAMPLES = 10_000
# uniforms consumed per sample: θ_v, θ_1 pair, θ_A2, θ_B2, two outcomes, one spare
DRAWS_PER_SAMPLE = 8
# numpy's Philox yields four 64-bit words per counter increment
WORDS_PER_COUNTER = 4


def _pick_nodes(masses: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of node indices."""
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, uniforms, side='right'), len(masses) - 1)


@dataclass
class AngleSampler:
    """Angles fed to each Monte Carlo sample."""

    theta_v: AngleDistribution
    psi: Optional[AngleDistribution] = None
    joint: Optional[JointAngleDistribution] = None
    theta_A2: Optional[AngleDistribution] = None
    theta_B2: Optional[AngleDistribution] = None

    def __post_init__(self):
        if (self.psi is None) == (self.joint is None):
            raise ValueError("Give exactly one of a ψ₋ distribution or a joint (θ_A1, θ_B1) distribution")

    def _draw(self, dist: Optional[AngleDistribution], uniforms: np.ndarray) -> np.ndarray:
        if dist is None:
            return np.zeros_like(uniforms)
        return dist.nodes[_pick_nodes(dist.masses, uniforms)]

    def angles(self, theta_a: float, theta_b: float, u: np.ndarray):
        theta_v = self._draw(self.theta_v, u[0])
        if self.psi is not None:
            # under a uniform θ_v only θ_A1 − θ_B1 enters, so B's leg carries none of it
            theta_A1 = self._draw(self.psi, u[1])
            theta_B1 = np.zeros_like(theta_A1)
        else:
            flat = _pick_nodes(self.joint.masses.ravel(), u[1])
            theta_A1 = self.joint.nodes_A[flat // self.joint.n]
            theta_B1 = self.joint.nodes_B[flat % self.joint.n]
        theta_A = theta_a - theta_v + theta_A1 + self._draw(self.theta_A2, u[2])
        theta_B = theta_b - theta_v + B_SIDE_OFFSET + theta_B1 + self._draw(self.theta_B2, u[3])
        return theta_A, theta_B

    def describe(self) -> Dict[str, Any]:
        return {
            'theta_v_bins': self.theta_v.n,
            'mode': 'psi' if self.psi is not None else 'joint',
            'outside_holonomy': self.theta_A2 is not None or self.theta_B2 is not None,
        }


@dataclass
class MonteCarloEstimate:
    probabilities: OutcomeProbabilities
    counts: np.ndarray
    n_samples: int
    seed: int
    chunk_size: int
    threads: int

    def as_dict(self) -> Dict[str, Any]:
        return {
            'table': self.probabilities.table.tolist(),
            'stderr': self.probabilities.stderr.tolist(),
            'counts': self.counts.tolist(),
            'n_samples': self.n_samples,
            'seed': self.seed,
            'chunk_size': self.chunk_size,
            'threads': self.threads,
        }


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    if settings.MC_REQUIRE_SEED:
        raise SeedRequired("Monte Carlo runs need an explicit seed in reproducibility mode")
    seed = int(np.random.SeedSequence().entropy % (1 << 63))
    logger.warning(f"No seed supplied, drew {seed} from system entropy")
    return seed


def chunk_generator(seed: int, first_sample: int) -> np.random.Generator:
    """Generator positioned at ``first_sample`` of the counter-based stream keyed by ``seed``."""
    bit_generator = np.random.Philox(key=seed)
    bit_generator.advance(first_sample * DRAWS_PER_SAMPLE // WORDS_PER_COUNTER)
    return np.random.Generator(bit_generator)


def _count_chunk(seed: int, start: int, size: int, sampler: AngleSampler, response: ResponseFunction,
                 theta_a: float, theta_b: float) -> np.ndarray:
    u = chunk_generator(seed, start).random((DRAWS_PER_SAMPLE, size))
    theta_A, theta_B = sampler.angles(theta_a, theta_b, u)
    # outcome index 0 is +1; A and B are drawn independently given the angles
    index_A = (u[4] >= response.plus(theta_A)).astype(np.int64)
    index_B = (u[5] >= response.plus(theta_B)).astype(np.int64)
    return np.bincount(2 * index_A + index_B, minlength=4)


def mc_probability(seed: Optional[int], n_samples: int, sampler: AngleSampler, response: ResponseFunction,
                   theta_a: float, theta_b: float, threads: Optional[int] = None,
                   chunk_size: Optional[int] = None) -> MonteCarloEstimate:
    """Frequency estimates of p(A, B) with binomial standard errors.

    Samples are cut into fixed chunks, each reading its own slice of one Philox stream, so the
    estimate depends on the seed and the chunk size but not on how many threads run the chunks.
    """
    if n_samples < MIN_SAMPLES:
        raise ResolutionTooLow(f"{n_samples} Monte Carlo samples requested, at least {MIN_SAMPLES} are needed")
    seed = resolve_seed(seed)
    threads = max(1, int(threads or settings.DEFAULT_THREADS))
    chunk_size = int(chunk_size or settings.MC_CHUNK_SIZE)
    starts = list(range(0, n_samples, chunk_size))

    def work(start: int) -> np.ndarray:
        return _count_chunk(seed, start, min(chunk_size, n_samples - start), sampler, response, theta_a, theta_b)

    with ThreadPoolExecutor(max_workers=threads) as executor:
        counts = sum(executor.map(work, starts))

    table = counts.reshape(2, 2) / n_samples
    stderr = np.sqrt(table * (1.0 - table) / n_samples)
    logger.info(f"Monte Carlo: {n_samples} samples in {len(starts)} chunks on {threads} threads, seed {seed}")
    probabilities = OutcomeProbabilities(table, method='mc', stderr=stderr,
                                         context={'theta_ab': theta_a - theta_b, **sampler.describe()})
    return MonteCarloEstimate(probabilities, counts.reshape(2, 2), n_samples, seed, chunk_size, threads)
