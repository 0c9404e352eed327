"""One function per ``manage.py run`` subcommand; each returns a RunResult for the ReportWriter."""
import logging
import math
from typing import Any, Dict, List, Tuple

from chsh_scan.sweep import gridpoint_seed, record_sweep, run_sweep
from curvedchsh.exceptions import CurvedChshError
from dynamics.distributions import AngleDistribution
from dynamics.monte_carlo import AngleSampler, mc_probability
from dynamics.probabilities import (
    OutcomeProbabilities, closed_form_table, correlation, quad_table, quantum_table,
)
from geometry.helper_functions import wrap_angle
from geometry.spacetimes import Spacetime, build_spacetime
from inverse.chsh import maximize_chsh
from inverse.exceptions import InverseNoConvergence
from inverse.fourier import fourier_feasibility
from inverse.problem import InverseProblem
from inverse.solver import solve_nnls
from scenario.angles import decompose_holonomy, extract_angles
from scenario.builder import ExperimentGeometry, build_geometry
from worldviews.consistency import check_consistency
from worldviews.dag_format import load_dag
from worldviews.functor import all_worldviews, event_algebra_functor
from worldviews.measurement import measurement_scenario
from worldviews.sieves import FinitePoset, sieves
from worldviews.worldview import observer_worldviews, product_measure

from .config import RunConfig
from .reports import RunResult

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('geometry', 'probabilities', 'inverse', 'sweep', 'worldviews')


def build_experiment(config: RunConfig) -> Tuple[Spacetime, ExperimentGeometry]:
    spacetime = build_spacetime(config.spacetime)
    return spacetime, build_geometry(spacetime, config.experiment())


def run_geometry(config: RunConfig, **kwargs) -> RunResult:
    spacetime, geom = build_experiment(config)
    holonomy = decompose_holonomy(spacetime, geom)
    experiment = geom.config
    rows = []
    for choice_A in range(len(experiment.measurement_dirs_A)):
        for choice_B in range(len(experiment.measurement_dirs_B)):
            angles = extract_angles(spacetime, geom, choice_A, choice_B, theta_v=0.0)
            rows.append({'choice_A': choice_A, 'choice_B': choice_B, **angles.as_dict(),
                         **{f"defect_{name}": value for name, value in angles.invariant_defects().items()}})
    failures = geom.invariant_failures()
    if failures:
        logger.warning(f"Geometry invariants above tolerance: {failures}")
    payload = {
        'geometry': geom.as_dict(),
        'holonomy': holonomy.as_dict(),
        'angles': rows,
        'invariant_failures': failures,
    }
    summary = (f"geometry: ψ₋ = {holonomy.psi_minus:.3e}, θ_A1 = {holonomy.theta_A1:.3e}, "
               f"θ_B1 = {holonomy.theta_B1:.3e}, {len(rows)} direction pairs")
    return RunResult('geometry', payload, {'angles': rows}, summary)


def _method_entry(probabilities: OutcomeProbabilities) -> Dict[str, Any]:
    return {
        'table': probabilities.table.tolist(),
        'stderr': probabilities.stderr.tolist() if probabilities.stderr is not None else None,
        'E': correlation(probabilities),
    }


def run_probabilities(config: RunConfig, **kwargs) -> RunResult:
    """Closed form, quadrature and Monte Carlo side by side at each θ_ab (θ_b = 0), plus the quantum target."""
    spacetime, geom = build_experiment(config)
    holonomy = decompose_holonomy(spacetime, geom)
    dynamics = config.dynamics
    response = config.response()
    theta_v = AngleDistribution.uniform(dynamics['theta_v_bins'])
    sampler = AngleSampler(theta_v, psi=AngleDistribution.point_mass(holonomy.psi_minus, dynamics['psi_bins']))

    rows: List[Dict[str, Any]] = []
    entries = []
    for index, theta_ab in enumerate(dynamics['theta_ab']):
        methods = [
            closed_form_table(wrap_angle(theta_ab + holonomy.psi_minus + math.pi)),
            quad_table(response, theta_v, theta_ab, 0.0, holonomy.theta_A1, holonomy.theta_B1, dynamics.get('nodes')),
        ]
        if dynamics['mc_samples']:
            seed = gridpoint_seed(config.seed, index) if config.seed is not None else None
            estimate = mc_probability(seed, dynamics['mc_samples'], sampler, response,
                                      theta_ab, 0.0, threads=config.threads)
            methods.append(estimate.probabilities)
        methods.append(quantum_table(theta_ab))
        for probabilities in methods:
            rows.extend(probabilities.as_records(theta_ab))
        entries.append({'theta_ab': theta_ab, 'methods': {p.method: _method_entry(p) for p in methods}})

    payload = {
        'holonomy': holonomy.as_dict(),
        'response': response.describe(),
        'theta_v_bins': theta_v.n,
        'mc_samples': dynamics['mc_samples'],
        'seed': config.seed,
        'results': entries,
    }
    first = entries[0]['methods']['quad']['table'][0][0]
    summary = f"probabilities: {len(entries)} angles, p(++) at θ_ab = {dynamics['theta_ab'][0]:.4f} is {first:.6f}"
    return RunResult('probabilities', payload, {'table': rows}, summary)


def inverse_problem(config: RunConfig) -> InverseProblem:
    block = config.require('inverse')
    options = {'bins': block.get('bins'), 'regularization': block['regularization']}
    if block['mode'] == 'dense':
        return InverseProblem.dense(block['size'], **options)
    if block['mode'] == 'explicit':
        return InverseProblem(tuple(block['targets']), **options)
    scenario = config.require('scenario')
    return InverseProblem.from_directions(scenario['measurement_dirs_A'], scenario['measurement_dirs_B'], **options)


def run_inverse(config: RunConfig, **kwargs) -> RunResult:
    block = config.require('inverse')
    problem = inverse_problem(config)
    partial = False
    try:
        solution = solve_nnls(problem, max_iter=block.get('max_iter'), tol=block.get('tol'))
    except InverseNoConvergence as e:
        if e.best is None:
            raise
        logger.error(f"Inverse solver did not converge, reporting the best iterate: {e}")
        solution, partial = e.best, True
    feasibility = fourier_feasibility(problem.targets)

    fitted = problem.kernel() @ solution.density.masses
    targets = [{'theta_ab': theta, 'target': float(target), 'fitted': float(value)}
               for theta, target, value in zip(problem.targets, problem.target_values(), fitted)]
    density = [{'psi': float(node), 'density': float(value)}
               for node, value in zip(solution.density.nodes, solution.density.density)]
    payload = {
        'problem': problem.as_dict(),
        'solution': solution.as_dict(),
        'fourier': feasibility.as_dict(),
        'feasible': solution.feasible and feasibility.feasible,
        'residual': solution.residual,
        'residual_floor': feasibility.lower_bound,
    }
    if block['maximize_chsh']:
        payload['chsh'] = maximize_chsh(bins=problem.bins, restarts=block['chsh_restarts'],
                                        seed=config.seed).as_dict()
    summary = (f"inverse: {problem.mode} with {len(problem.targets)} targets, residual {solution.residual:.3e}, "
               f"Fourier floor {feasibility.lower_bound:.3e}, feasible={payload['feasible']}")
    return RunResult('inverse', payload, {'density': density, 'targets': targets}, summary, partial)


def run_sweep_command(config: RunConfig, record: bool = False, **kwargs) -> RunResult:
    report = run_sweep(config.sweep_spec())
    payload = report.as_dict()
    if record:
        payload['sweep_run_id'] = record_sweep(report).id
    gridpoints = []
    for entry in report.records:
        row = {'gridpoint': entry['index'], 'value': entry['value'], 'success': entry['success']}
        if entry['success']:
            row.update({name: entry['holonomy'][name] for name in
                        ('theta_A1', 'theta_A2', 'theta_B1', 'theta_B2', 'psi_minus')})
            row.update({f"S_{method}": values['S'] for method, values in entry['correlations'].items()})
            row['inverse_residual'] = entry['inverse_residual']
        else:
            row['error'] = entry['error']
        gridpoints.append(row)
    summary = (f"sweep: {len(report.records)} gridpoints, {len(report.failures)} failed, "
               f"config {report.provenance['config_hash'][:12]}")
    return RunResult('sweep', payload, {'probabilities': report.table_rows(), 'gridpoints': gridpoints},
                     summary, report.partial)


def _sieve_reports(poset: FinitePoset) -> List[Dict[str, Any]]:
    reports = []
    for element in poset.maximal():
        try:
            reports.append({'success': True, **sieves(poset, element).as_dict()})
        except CurvedChshError as e:
            logger.error(f"Sieves at {element!r} failed: {e}")
            reports.append({'element': str(element), **e.to_dict()})
    return reports


def run_worldviews(config: RunConfig, **kwargs) -> RunResult:
    block = config.require('worldviews')
    document = load_dag(block['dag_file'])
    dag, space = document.dag, document.space
    cap = block.get('cap')
    prior = product_measure(space)
    chains = document.chains or (dag.longest_chain(),)

    observers = []
    consistency_rows = []
    for index, chain in enumerate(chains):
        worldviews = observer_worldviews(space, document.true_config, chain, prior=prior, cap=cap)
        report = check_consistency(worldviews, chain)
        observers.append({
            'chain': [str(point) for point in chain],
            'worldviews': {str(point): worldview.as_dict() for point, worldview in worldviews.items()},
            'consistency': report.as_dict(),
        })
        for name, result in report.conditions.items():
            consistency_rows.append({'observer': index, 'condition': name, 'checked': result.checked,
                                     'zero_mass': result.zero_mass, 'passed': result.passed})

    functor = event_algebra_functor(all_worldviews(space, document.true_config, cap=cap))
    poset = functor.algebra_poset() if block['sieve_poset'] == 'algebras' else FinitePoset.from_dag(dag)
    sieve_reports = _sieve_reports(poset)
    payload = {
        'dag': dag.as_dict(),
        'fields': document.field_names,
        'observers': observers,
        'functor': functor.as_dict(),
        'sieves': {'poset': block['sieve_poset'], 'algebras': sieve_reports},
    }
    if 'measurement' in block:
        shape = block['measurement']
        payload['measurement'] = measurement_scenario(dag, shape['p0'], shape['region'], shape['p1'], shape['p2'],
                                                      shape.get('devices')).as_dict()

    omega_rows = [{'point': str(point), 'omega_size': size, 'past_size': len(dag.causal_past(point))}
                  for point, size in functor.sizes().items()]
    passed = all(observer['consistency']['passed'] for observer in observers)
    summary = (f"worldviews: {len(dag)} points, {len(observers)} observers, consistency "
               f"{'passes' if passed else 'fails'}, functorial={functor.functorial}")
    partial = any(not report['success'] for report in sieve_reports)
    return RunResult('worldviews', payload, {'omega': omega_rows, 'consistency': consistency_rows}, summary,
                     partial)


PIPELINES = {
    'geometry': run_geometry,
    'probabilities': run_probabilities,
    'inverse': run_inverse,
    'sweep': run_sweep_command,
    'worldviews': run_worldviews,
}


def dry_run(config: RunConfig) -> Dict[str, Any]:
    """Everything ``validate`` checks beyond the schema: the geometry builds and the DAG file parses."""
    checks: Dict[str, Any] = {'blocks': sorted(config.data)}
    if 'scenario' in config.data:
        spacetime, geom = build_experiment(config)
        checks['geometry'] = {'p_E': geom.p_E.tolist(), 'residuals': geom.residuals,
                              'invariant_failures': geom.invariant_failures()}
    if 'worldviews' in config.data:
        document = load_dag(config.data['worldviews']['dag_file'])
        checks['worldviews'] = {'points': len(document.dag), 'fields': document.field_names,
                                'chains': len(document.chains)}
    if 'sweep' in config.data and 'scenario' in config.data:
        checks['sweep'] = {'gridpoints': len(config.sweep_spec().grid)}
    if 'inverse' in config.data:
        checks['inverse'] = {'targets': len(inverse_problem(config).targets)}
    return checks
