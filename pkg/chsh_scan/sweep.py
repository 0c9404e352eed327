import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from curvedchsh.exceptions import CurvedChshError
from dynamics.distributions import AngleDistribution, JointAngleDistribution
from dynamics.monte_carlo import AngleSampler, mc_probability
from dynamics.probabilities import (
    OutcomeProbabilities, chsh_value, closed_form_table, correlation, po_table, quad_table, simp_table,
)
from dynamics.response import ResponseFunction
from geometry.helper_functions import wrap_angle
from geometry.spacetimes import build_spacetime
from inverse.chsh import STANDARD_ANGLES
from inverse.problem import InverseProblem
from scenario.angles import decompose_holonomy, extract_angles
from scenario.builder import build_geometry
from scenario.config import ExperimentConfig

from .exceptions import InvalidSweep
from .models import SweepRun
from .perturbations import SCHEME, PerturbationSpec, empirical_psi_distribution

logger = logging.getLogger(__name__)

AGREEMENT_SIGMAS = 3.0
# the four (θ_a, θ_b) pairs entering S, as indices into (a, a', b, b')
CHSH_PAIRS = ((0, 2), (0, 3), (1, 2), (1, 3))


@dataclass(frozen=True)
class SweepSpec:
    spacetime: Dict[str, Any]
    experiment: ExperimentConfig
    parameter: Optional[str] = None
    values: Tuple[float, ...] = ()
    chsh_angles: Optional[Tuple[float, float, float, float]] = None
    theta_v_bins: int = 64
    psi_bins: int = 64
    nodes: Optional[int] = None
    mc_samples: int = 0
    seed: Optional[int] = None
    perturbation: Optional[PerturbationSpec] = None
    threads: Optional[int] = None
    response: ResponseFunction = field(default_factory=ResponseFunction.malus, compare=False)

    def __post_init__(self):
        if self.parameter is not None:
            if not self.values:
                raise InvalidSweep(f"Sweep over '{self.parameter}' has an empty grid")
            object.__setattr__(self, 'values', tuple(float(value) for value in self.values))
        elif self.values:
            raise InvalidSweep("Grid values given without a parameter to vary")
        if self.chsh_angles is None:
            object.__setattr__(self, 'chsh_angles', self._default_angles())
        if len(self.chsh_angles) != 4:
            raise InvalidSweep("CHSH needs four angles (θ_a, θ_a', θ_b, θ_b')")
        object.__setattr__(self, 'chsh_angles', tuple(float(angle) for angle in self.chsh_angles))
        if self.psi_bins < settings.QUADRATURE_MIN_NODES:
            raise InvalidSweep(f"psi_bins must be at least {settings.QUADRATURE_MIN_NODES}")
        if self.mc_samples and self.seed is None:
            raise InvalidSweep("Monte Carlo sweeps need a seed")
        if self.perturbation is not None and self.seed is None:
            raise InvalidSweep("Perturbation ensembles need a seed")

    def _default_angles(self) -> Tuple[float, float, float, float]:
        dirs_A, dirs_B = self.experiment.measurement_dirs_A, self.experiment.measurement_dirs_B
        if len(dirs_A) >= 2 and len(dirs_B) >= 2:
            return dirs_A[0], dirs_A[1], dirs_B[0], dirs_B[1]
        return STANDARD_ANGLES

    @property
    def grid(self) -> List[Dict[str, Any]]:
        if self.parameter is None:
            return [dict(self.spacetime)]
        return [{**self.spacetime, self.parameter: value} for value in self.values]

    def as_dict(self) -> Dict[str, Any]:
        return {
            'spacetime': self.spacetime,
            'experiment': self.experiment.as_dict(),
            'parameter': self.parameter,
            'values': list(self.values),
            'chsh_angles': list(self.chsh_angles),
            'theta_v_bins': self.theta_v_bins,
            'psi_bins': self.psi_bins,
            'nodes': self.nodes,
            'mc_samples': self.mc_samples,
            'seed': self.seed,
            'perturbation': self.perturbation.as_dict() if self.perturbation else None,
            'response': self.response.describe(),
        }


def config_hash(payload: Dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def gridpoint_seed(seed: int, index: int) -> int:
    """Monte Carlo key for one gridpoint, drawn from the (seed, index) stream."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class SweepReport:
    spec: SweepSpec
    records: List[Dict[str, Any]]
    provenance: Dict[str, Any]

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [record for record in self.records if not record['success']]

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def as_dict(self, timestamp: bool = True) -> Dict[str, Any]:
        provenance = dict(self.provenance)
        if not timestamp:
            provenance.pop('generated_at', None)
        return {
            'provenance': provenance,
            'spec': self.spec.as_dict(),
            'gridpoints': len(self.records),
            'failures': len(self.failures),
            'partial': self.partial,
            'records': self.records,
        }

    def table_rows(self) -> List[Dict[str, Any]]:
        """One row per gridpoint, angle pair, method and outcome pair, for plotting."""
        rows = []
        for record in self.records:
            if not record['success']:
                continue
            for entry in record['tables']:
                for A_index, A in enumerate((1, -1)):
                    for B_index, B in enumerate((1, -1)):
                        stderr = entry['stderr']
                        rows.append({
                            'gridpoint': record['index'],
                            'value': record['value'],
                            'theta_a': entry['theta_a'],
                            'theta_b': entry['theta_b'],
                            'method': entry['method'],
                            'A': A,
                            'B': B,
                            'p': entry['table'][A_index][B_index],
                            'stderr': stderr[A_index][B_index] if stderr else None,
                        })
        return rows


def _table_entry(theta_a: float, theta_b: float, probabilities: OutcomeProbabilities) -> Dict[str, Any]:
    return {
        'theta_a': theta_a,
        'theta_b': theta_b,
        'method': probabilities.method,
        'table': probabilities.table.tolist(),
        'stderr': probabilities.stderr.tolist() if probabilities.stderr is not None else None,
        'E': correlation(probabilities),
    }


def _inverse_residual(spec: SweepSpec, psi: AngleDistribution) -> float:
    """RMS misfit of this gridpoint's P(ψ₋) in the quantum-matching equation over the configured directions."""
    problem = InverseProblem.from_directions(spec.experiment.measurement_dirs_A, spec.experiment.measurement_dirs_B,
                                             bins=psi.n)
    misfit = problem.kernel(psi.nodes) @ psi.masses - problem.target_values()
    return float(math.sqrt(misfit @ misfit / len(misfit)))


def _run_gridpoint(spec: SweepSpec, index: int, spacetime_spec: Dict[str, Any]) -> Dict[str, Any]:
    value = spacetime_spec.get(spec.parameter) if spec.parameter else None
    spacetime = build_spacetime(spacetime_spec)
    geom = build_geometry(spacetime, spec.experiment)
    holonomy = decompose_holonomy(spacetime, geom)
    angles = extract_angles(spacetime, geom, 0, 0, theta_v=0.0)

    record: Dict[str, Any] = {
        'index': index,
        'parameter': spec.parameter,
        'value': value,
        'success': True,
        'spacetime': spacetime.describe(),
        'holonomy': holonomy.as_dict(),
        'angles': angles.as_dict(),
    }

    if spec.perturbation is not None:
        ensemble = empirical_psi_distribution(spacetime_spec, spec.experiment, spec.perturbation, spec.seed,
                                              gridpoint=index, bins=spec.psi_bins, threads=1)
        psi_dist, joint = ensemble.distribution, ensemble.joint
        theta_A2, theta_B2 = ensemble.theta_A2, ensemble.theta_B2
        record['psi_source'] = 'ensemble'
        record['ensemble'] = ensemble.as_dict()
    else:
        psi_dist = AngleDistribution.point_mass(holonomy.psi_minus, spec.psi_bins)
        joint = JointAngleDistribution.point_mass(holonomy.theta_A1, holonomy.theta_B1, spec.psi_bins)
        theta_A2 = AngleDistribution.point_mass(holonomy.theta_A2, spec.psi_bins)
        theta_B2 = AngleDistribution.point_mass(holonomy.theta_B2, spec.psi_bins)
        record['psi_source'] = 'geometry'

    theta_v = AngleDistribution.uniform(spec.theta_v_bins)
    sampler = AngleSampler(theta_v, psi=psi_dist)
    # quad only sees the nominal holonomy, so an ensemble is checked against its own ψ₋ average
    mc_reference = 1 if record['psi_source'] == 'geometry' else 2
    tables, correlations = [], {}
    worst_z = 0.0
    for first, second in CHSH_PAIRS:
        theta_a, theta_b = spec.chsh_angles[first], spec.chsh_angles[second]
        methods = [
            closed_form_table(wrap_angle(theta_a - theta_b + holonomy.psi_minus + math.pi)),
            quad_table(spec.response, theta_v, theta_a, theta_b, holonomy.theta_A1, holonomy.theta_B1, spec.nodes),
            simp_table(psi_dist, theta_a - theta_b),
            po_table(spec.response, theta_v, joint, theta_A2, theta_B2, theta_a, theta_b),
        ]
        if spec.mc_samples:
            estimate = mc_probability(gridpoint_seed(spec.seed, index), spec.mc_samples, sampler, spec.response,
                                      theta_a, theta_b, threads=1)
            methods.append(estimate.probabilities)
            reference = methods[mc_reference].table
            stderr = np.maximum(estimate.probabilities.stderr, 1e-300)
            worst_z = max(worst_z, float(np.max(np.abs(estimate.probabilities.table - reference) / stderr)))
        for probabilities in methods:
            tables.append(_table_entry(theta_a, theta_b, probabilities))
            correlations.setdefault(probabilities.method, []).append(correlation(probabilities))

    record['tables'] = tables
    record['correlations'] = {method: {'E': values, 'S': chsh_value(*values)}
                              for method, values in correlations.items()}
    record['normalization_defect'] = max(abs(sum(map(sum, entry['table'])) - 1.0) for entry in tables)
    if spec.mc_samples:
        record['mc_agreement'] = {'reference': ('quad', 'simp')[mc_reference - 1], 'max_z': worst_z,
                                  'within_3_sigma': worst_z <= AGREEMENT_SIGMAS}
    record['inverse_residual'] = _inverse_residual(spec, psi_dist)
    logger.info(f"Gridpoint {index} ({spec.parameter}={value}): ψ₋ = {holonomy.psi_minus:.3e}, "
                f"S(closed) = {record['correlations']['closed']['S']:.6f}")
    return record


def _safe_gridpoint(spec: SweepSpec, index: int, spacetime_spec: Dict[str, Any]) -> Dict[str, Any]:
    try:
        return _run_gridpoint(spec, index, spacetime_spec)
    except (CurvedChshError, ValueError) as e:
        logger.error(f"Gridpoint {index} failed: {e}")
        payload = e.to_dict() if isinstance(e, CurvedChshError) else {
            'success': False, 'error_type': type(e).__name__, 'error': str(e),
        }
        return {
            'index': index,
            'parameter': spec.parameter,
            'value': spacetime_spec.get(spec.parameter) if spec.parameter else None,
            **payload,
        }


def run_sweep(spec: SweepSpec) -> SweepReport:
    """Build, decompose and evaluate every gridpoint; failures are recorded and the sweep moves on."""
    threads = max(1, int(spec.threads or settings.DEFAULT_THREADS))
    grid = spec.grid
    with ThreadPoolExecutor(max_workers=threads) as executor:
        records = list(executor.map(lambda item: _safe_gridpoint(spec, *item), enumerate(grid)))

    provenance = {
        'config_hash': config_hash(spec.as_dict()),
        'seed': spec.seed,
        'code_version': settings.CODE_VERSION,
        'perturbation_scheme': SCHEME if spec.perturbation is not None else None,
        'generated_at': datetime.now(timezone.utc).isoformat(),
    }
    report = SweepReport(spec, records, provenance)
    logger.info(f"Sweep over {len(grid)} gridpoints finished with {len(report.failures)} failures")
    return report


def record_sweep(report: SweepReport) -> SweepRun:
    run = SweepRun.objects.create(
        config_hash=report.provenance['config_hash'],
        seed=report.spec.seed,
        code_version=report.provenance['code_version'],
        parameter=report.spec.parameter or '',
        gridpoints=len(report.records),
        failures=len(report.failures),
        status='partial' if report.partial else 'complete',
        report=report.as_dict(),
    )
    logger.info(f"Recorded sweep run {run.id} ({run.status})")
    return run
