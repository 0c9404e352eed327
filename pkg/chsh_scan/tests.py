import json
import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, TestCase

from dynamics.probabilities import chsh_value, closed_form_table, correlation
from scenario.angles import HolonomyDecomposition
from scenario.config import ExperimentConfig

from .exceptions import InvalidSweep, TooManyFailures
from .models import SweepRun
from .perturbations import PerturbationSpec, draw_generator, empirical_psi_distribution, perturbed_spec
from .sweep import SweepSpec, config_hash, gridpoint_seed, record_sweep, run_sweep

EXPERIMENT = ExperimentConfig(
    p_O=(0.0, 0.0, 0.0, 0.0),
    tau_E=1.0,
    measurement_dirs_A=(0.0, math.pi / 4),
    measurement_dirs_B=(math.pi / 8, 3 * math.pi / 8),
    step=0.05,
)
FLAT = {'kind': 'minkowski'}
BUMP = {'kind': 'weak-field', 'mass': 0.0, 'r_min': 0.5, 'center': [1.5, 0.0, 0.0]}


def sweep_spec(**overrides):
    options = {'spacetime': FLAT, 'experiment': EXPERIMENT, 'nodes': 256}
    options.update(overrides)
    return SweepSpec(**options)


def entries(record, method, theta_a=None, theta_b=None):
    return [entry for entry in record['tables'] if entry['method'] == method
            and (theta_a is None or math.isclose(entry['theta_a'], theta_a, abs_tol=1e-12))
            and (theta_b is None or math.isclose(entry['theta_b'], theta_b, abs_tol=1e-12))]


class SweepSpecTests(SimpleTestCase):

    def test_empty_grid_is_rejected(self):
        with self.assertRaises(InvalidSweep):
            sweep_spec(parameter='mass', values=())

    def test_values_without_parameter_are_rejected(self):
        with self.assertRaises(InvalidSweep):
            sweep_spec(values=(0.1,))

    def test_monte_carlo_needs_a_seed(self):
        with self.assertRaises(InvalidSweep):
            sweep_spec(mc_samples=10_000)

    def test_perturbations_need_a_seed(self):
        with self.assertRaises(InvalidSweep):
            sweep_spec(perturbation=PerturbationSpec())

    def test_chsh_angles_default_to_the_first_two_directions(self):
        self.assertEqual(sweep_spec().chsh_angles, (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8))

    def test_grid_overrides_one_spacetime_parameter(self):
        spec = sweep_spec(spacetime=BUMP, parameter='mass', values=(0.0, 0.01))
        self.assertEqual([point['mass'] for point in spec.grid], [0.0, 0.01])
        self.assertEqual(spec.grid[1]['r_min'], 0.5)

    def test_config_hash_ignores_key_order(self):
        self.assertEqual(config_hash({'a': 1, 'b': [1, 2]}), config_hash({'b': [1, 2], 'a': 1}))
        self.assertNotEqual(config_hash({'a': 1}), config_hash({'a': 2}))

    def test_gridpoint_seeds_differ(self):
        self.assertNotEqual(gridpoint_seed(7, 0), gridpoint_seed(7, 1))
        self.assertEqual(gridpoint_seed(7, 3), gridpoint_seed(7, 3))


class FlatSweepTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.report = run_sweep(sweep_spec(chsh_angles=(0.0, math.pi / 4, 0.0, math.pi / 8), mc_samples=20_000,
                                          seed=11))
        cls.record = cls.report.records[0]

    def test_flat_gridpoint_has_no_holonomy(self):
        self.assertTrue(self.record['success'])
        for name in ('theta_A1', 'theta_A2', 'theta_B1', 'theta_B2'):
            self.assertAlmostEqual(math.remainder(self.record['holonomy'][name], 2 * math.pi), 0.0, places=8)
        self.assertEqual(self.record['psi_source'], 'geometry')

    def test_equal_settings_give_three_eighths(self):
        for method in ('closed', 'quad', 'simp', 'po'):
            (entry,) = entries(self.record, method, 0.0, 0.0)
            self.assertAlmostEqual(entry['table'][0][0], 0.375, places=7)
            self.assertAlmostEqual(entry['E'], 0.5, places=7)

    def test_every_table_sums_to_one(self):
        self.assertLess(self.record['normalization_defect'], 1e-9)

    def test_monte_carlo_agrees_with_quadrature(self):
        self.assertEqual(self.record['mc_agreement']['reference'], 'quad')
        self.assertLess(self.record['mc_agreement']['max_z'], 4.5)
        self.assertEqual(len(entries(self.record, 'mc')), 4)

    def test_flat_chsh_stays_below_the_envelope(self):
        for method in ('closed', 'quad', 'simp', 'po'):
            self.assertLessEqual(self.record['correlations'][method]['S'], math.sqrt(2) + 1e-6)

    def test_provenance(self):
        provenance = self.report.provenance
        self.assertEqual(len(provenance['config_hash']), 64)
        self.assertEqual(provenance['seed'], 11)
        self.assertIsNone(provenance['perturbation_scheme'])
        self.assertIn('generated_at', provenance)
        self.assertNotIn('generated_at', self.report.as_dict(timestamp=False)['provenance'])

    def test_table_rows_cover_every_outcome(self):
        rows = self.report.table_rows()
        self.assertEqual(len(rows), 4 * 5 * 4)
        self.assertEqual({row['method'] for row in rows}, {'closed', 'quad', 'simp', 'po', 'mc'})


class CurvedGridpointTests(SimpleTestCase):
    """A fixed off-grid holonomy fed through a whole gridpoint."""

    HOLONOMY = HolonomyDecomposition(0.05, 0.0, 0.03, 0.0, 0.05, 0.03)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        with mock.patch('chsh_scan.sweep.decompose_holonomy', return_value=cls.HOLONOMY):
            cls.record = run_sweep(sweep_spec(spacetime=BUMP, mc_samples=200_000, seed=21)).records[0]

    def test_every_method_sees_the_holonomy(self):
        self.assertTrue(self.record['success'])
        a, a_prime, b, b_prime = sweep_spec().chsh_angles
        for theta_a in (a, a_prime):
            for theta_b in (b, b_prime):
                expected = closed_form_table(theta_a - theta_b + 0.02 + math.pi).table
                (closed,) = entries(self.record, 'closed', theta_a, theta_b)
                np.testing.assert_allclose(closed['table'], expected, atol=1e-12)
                for method in ('quad', 'simp', 'po'):
                    (entry,) = entries(self.record, method, theta_a, theta_b)
                    np.testing.assert_allclose(entry['table'], closed['table'], atol=1e-9)

    def test_holonomy_moves_the_chsh_value(self):
        a, a_prime, b, b_prime = sweep_spec().chsh_angles
        flat = chsh_value(*[correlation(closed_form_table(x - y + math.pi))
                            for x, y in ((a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime))])
        self.assertGreater(abs(self.record['correlations']['closed']['S'] - flat), 1e-4)

    def test_monte_carlo_is_checked_against_quadrature(self):
        self.assertEqual(self.record['mc_agreement']['reference'], 'quad')
        self.assertLess(self.record['mc_agreement']['max_z'], 4.5)


class SweepGridTests(SimpleTestCase):

    def test_failed_gridpoint_is_recorded_and_the_sweep_continues(self):
        report = run_sweep(sweep_spec(spacetime=BUMP, parameter='mass', values=(0.0, 0.3)))
        self.assertTrue(report.records[0]['success'])
        self.assertFalse(report.records[1]['success'])
        self.assertEqual(report.records[1]['value'], 0.3)
        self.assertTrue(report.partial)
        self.assertEqual(len(report.table_rows()), 4 * 4 * 4)

    def test_reports_do_not_depend_on_thread_count(self):
        options = {'spacetime': BUMP, 'parameter': 'mass', 'values': (0.0, 0.002, 0.004),
                   'mc_samples': 10_000, 'seed': 5}
        serial = run_sweep(sweep_spec(threads=1, **options)).as_dict(timestamp=False)
        parallel = run_sweep(sweep_spec(threads=3, **options)).as_dict(timestamp=False)
        self.assertEqual(json.dumps(serial, sort_keys=True), json.dumps(parallel, sort_keys=True))

    def test_weak_field_gridpoints_keep_probabilities_normalised(self):
        report = run_sweep(sweep_spec(spacetime=BUMP, parameter='mass', values=(0.01,)))
        record = report.records[0]
        self.assertTrue(record['success'])
        self.assertLess(record['normalization_defect'], 1e-9)
        self.assertGreaterEqual(record['inverse_residual'], 0.0)


class EmpiricalPsiTests(SimpleTestCase):

    def test_perturbation_spec_validation(self):
        with self.assertRaises(InvalidSweep):
            PerturbationSpec(n_draws=50)
        with self.assertRaises(InvalidSweep):
            PerturbationSpec(amplitude=-0.1)

    def test_perturbed_spec_clips_negative_masses(self):
        spec = perturbed_spec(FLAT, PerturbationSpec(amplitude=0.01, position_jitter=0.1), np.array([-3.0, 1, 0, 0]))
        self.assertEqual(spec['kind'], 'weak-field')
        self.assertEqual(spec['mass'], 0.0)
        np.testing.assert_allclose(spec['center'], [1.6, 0.0, 0.0])

    def test_only_flat_and_weak_field_bases_are_perturbed(self):
        with self.assertRaises(InvalidSweep):
            perturbed_spec({'kind': 'product-sphere'}, PerturbationSpec(), np.zeros(4))

    def test_draws_are_keyed_by_seed_gridpoint_and_draw(self):
        first = draw_generator(3, 0, 1).standard_normal(4)
        np.testing.assert_array_equal(first, draw_generator(3, 0, 1).standard_normal(4))
        self.assertFalse(np.allclose(first, draw_generator(3, 1, 1).standard_normal(4)))

    def test_zero_amplitude_gives_a_point_mass_at_zero(self):
        ensemble = empirical_psi_distribution(FLAT, EXPERIMENT, PerturbationSpec(), seed=1)
        self.assertEqual(ensemble.failures, 0)
        self.assertAlmostEqual(ensemble.distribution.masses[0], 1.0, places=12)
        self.assertAlmostEqual(ensemble.distribution.masses.sum(), 1.0, places=12)

    def test_symmetric_perturbations_centre_psi_on_zero(self):
        perturbation = PerturbationSpec(amplitude=0.01, position_jitter=0.2)
        ensemble = empirical_psi_distribution(FLAT, EXPERIMENT, perturbation, seed=2024)
        self.assertLessEqual(abs(ensemble.mean), 3 * ensemble.stderr + 1e-12)
        self.assertAlmostEqual(ensemble.distribution.masses.sum(), 1.0, places=12)

    @mock.patch('chsh_scan.perturbations._holonomy', side_effect=ValueError("bad draw"))
    def test_too_many_failed_builds(self, holonomy):
        with self.assertRaises(TooManyFailures):
            empirical_psi_distribution(FLAT, EXPERIMENT, PerturbationSpec(amplitude=0.01), seed=1)

    def test_sweep_reports_the_perturbation_scheme(self):
        report = run_sweep(sweep_spec(perturbation=PerturbationSpec(), seed=9))
        record = report.records[0]
        self.assertEqual(record['psi_source'], 'ensemble')
        self.assertEqual(report.provenance['perturbation_scheme'], 'weak-field-jitter/v1')
        (entry,) = entries(record, 'simp', 0.0, math.pi / 8)
        (closed,) = entries(record, 'closed', 0.0, math.pi / 8)
        np.testing.assert_allclose(entry['table'], closed['table'], atol=1e-8)


class SweepRunTests(TestCase):

    def test_recording_a_partial_sweep(self):
        report = run_sweep(sweep_spec(spacetime=BUMP, parameter='mass', values=(0.0, 0.3)))
        run = record_sweep(report)
        self.assertEqual(SweepRun.objects.count(), 1)
        self.assertEqual(run.status, 'partial')
        self.assertEqual(run.failures, 1)
        self.assertEqual(run.report['provenance']['config_hash'], report.provenance['config_hash'])
