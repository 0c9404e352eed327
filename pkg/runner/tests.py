import csv
import json
import math
import os
import shutil
import tempfile
from io import StringIO

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from chsh_scan.models import SweepRun

from .config import RunConfig, validate_config
from .exceptions import ConfigError
from .serializers import flatten_errors

CONFIGS = settings.BASE_DIR / 'configs'

SCENARIO = {
    'tau_E': 1.0,
    'measurement_dirs_A': [0.0, math.pi / 4],
    'measurement_dirs_B': [math.pi / 8, 3 * math.pi / 8],
    'step': 0.05,
}


class CommandTestMixin:

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def write_config(self, payload, name='config.json'):
        path = os.path.join(self.tmp, name)
        with open(path, 'w') as f:
            json.dump(payload, f)
        return path

    def run_command(self, *args, **options):
        stdout, stderr = StringIO(), StringIO()
        call_command(*args, stdout=stdout, stderr=stderr, **options)
        return stdout.getvalue()

    def failing_command(self, *args, **options):
        stderr = StringIO()
        with self.assertRaises(CommandError) as cm:
            call_command(*args, stdout=StringIO(), stderr=stderr, **options)
        return cm.exception.returncode, json.loads(stderr.getvalue().strip().splitlines()[-1])

    def report(self, name):
        with open(os.path.join(self.tmp, 'out', f"{name}.json")) as f:
            return json.load(f)

    def rows(self, name):
        with open(os.path.join(self.tmp, 'out', f"{name}.csv"), newline='') as f:
            return list(csv.DictReader(f))


class ConfigSchemaTests(SimpleTestCase):

    def test_minimal_config_gets_default_blocks(self):
        data = validate_config({'scenario': SCENARIO})
        self.assertEqual(data['spacetime']['kind'], 'minkowski')
        self.assertEqual(data['dynamics']['theta_v_bins'], 64)
        self.assertEqual(data['output']['formats'], ['json', 'csv'])

    def test_unknown_keys_are_rejected_at_every_level(self):
        with self.assertRaises(ConfigError) as cm:
            validate_config({'scenario': {**SCENARIO, 'colour': 'red'}, 'extra': 1})
        self.assertIn('scenario.colour', cm.exception.fields)
        self.assertIn('extra', cm.exception.fields)

    def test_weak_field_needs_its_parameters(self):
        with self.assertRaises(ConfigError) as cm:
            validate_config({'spacetime': {'kind': 'weak-field', 'mass': 0.1}})
        self.assertIn('spacetime.r_min', cm.exception.fields)

    def test_monte_carlo_needs_a_seed(self):
        with self.assertRaises(ConfigError) as cm:
            validate_config({'scenario': SCENARIO, 'dynamics': {'mc_samples': 20_000}})
        self.assertIn('seed', cm.exception.fields)

    def test_too_few_monte_carlo_samples(self):
        with self.assertRaises(ConfigError) as cm:
            validate_config({'seed': 1, 'dynamics': {'mc_samples': 500}})
        self.assertIn('dynamics.mc_samples', cm.exception.fields)

    def test_sweep_values_need_a_parameter(self):
        with self.assertRaises(ConfigError) as cm:
            validate_config({'sweep': {'values': [0.1]}})
        self.assertIn('sweep.parameter', cm.exception.fields)

    def test_flatten_errors(self):
        errors = {'scenario': {'tau_E': ['bad']}, 'sweep': {'values': {1: ['not a number']}}}
        self.assertEqual(flatten_errors(errors), {'scenario.tau_E': 'bad', 'sweep.values.1': 'not a number'})

    def test_flags_override_config_scalars(self):
        config = RunConfig.load(CONFIGS / 'flat.json').override(seed=3, out='elsewhere', nodes=128, threads=2)
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.output['directory'], 'elsewhere')
        self.assertEqual(config.dynamics['nodes'], 128)
        self.assertEqual(config.overrides, {'seed': 3, 'out': 'elsewhere', 'nodes': 128, 'threads': 2})

    def test_dag_file_resolves_next_to_the_config(self):
        config = RunConfig.load(CONFIGS / 'worldviews.json')
        self.assertEqual(config.data['worldviews']['dag_file'], str(CONFIGS / 'example_dag.txt'))


class ValidateCommandTests(CommandTestMixin, SimpleTestCase):

    def test_shipped_config_is_valid(self):
        output = self.run_command('validate', str(CONFIGS / 'flat.json'))
        checks = json.loads(output.splitlines()[0])
        self.assertTrue(checks['valid'])
        self.assertEqual(checks['geometry']['invariant_failures'], [])
        self.assertEqual(checks['inverse']['targets'], 64)

    def test_negative_emission_time_is_a_schema_error(self):
        path = self.write_config({'scenario': {**SCENARIO, 'tau_E': -1.0}})
        code, error = self.failing_command('validate', path)
        self.assertEqual(code, 2)
        self.assertIn('scenario.tau_E', error['fields'])
        self.assertEqual(error['error_type'], 'ConfigError')

    def test_unreachable_emission_event_is_a_geometry_failure(self):
        code, error = self.failing_command('validate', str(CONFIGS / 'unreachable.json'))
        self.assertEqual(code, 3)
        self.assertEqual(error['error_type'], 'ChartEscape')

    def test_malformed_json(self):
        path = os.path.join(self.tmp, 'broken.json')
        with open(path, 'w') as f:
            f.write('{"scenario": ')
        code, error = self.failing_command('validate', path)
        self.assertEqual(code, 2)

    def test_missing_dag_file(self):
        path = self.write_config({'worldviews': {'dag_file': 'missing.txt'}})
        code, error = self.failing_command('validate', path)
        self.assertEqual(code, 2)
        self.assertEqual(error['error_type'], 'DagFormatError')


class RunCommandTests(CommandTestMixin, TestCase):

    def flat_config(self, **blocks):
        return self.write_config({'scenario': SCENARIO, **blocks})

    def out(self):
        return os.path.join(self.tmp, 'out')

    def test_flat_geometry_has_no_holonomy(self):
        self.run_command('run', 'geometry', self.flat_config(), out=self.out())
        holonomy = self.report('geometry')['holonomy']
        for name in ('theta_A1', 'theta_A2', 'theta_B1', 'theta_B2', 'psi_minus'):
            self.assertAlmostEqual(math.remainder(holonomy[name], 2 * math.pi), 0.0, places=8)
        self.assertEqual(len(self.rows('geometry_angles')), 4)

    def test_flat_probabilities_at_equal_settings(self):
        path = self.flat_config(seed=4, dynamics={'theta_ab': [0.0, math.pi / 4], 'mc_samples': 10_000})
        self.run_command('run', 'probabilities', path, out=self.out(), nodes=256)
        report = self.report('probabilities')
        methods = report['results'][0]['methods']
        self.assertAlmostEqual(methods['closed']['table'][0][0], 0.375, places=7)
        self.assertAlmostEqual(methods['quad']['table'][0][0], 0.375, places=7)
        self.assertEqual(set(methods), {'closed', 'quad', 'mc', 'quantum'})
        self.assertEqual(report['config']['overrides'], {'out': self.out(), 'nodes': 256})
        rows = self.rows('probabilities_table')
        self.assertEqual(len(rows), 2 * 4 * 4)
        first = rows[0]
        self.assertEqual((first['A'], first['B'], first['method']), ('1', '1', 'closed'))
        self.assertAlmostEqual(float(first['value']), 0.375, places=7)

    def test_dense_inverse_is_infeasible(self):
        path = self.write_config({'inverse': {'mode': 'dense', 'size': 64, 'bins': 64}})
        self.run_command('run', 'inverse', path, out=self.out())
        report = self.report('inverse')
        self.assertFalse(report['feasible'])
        self.assertGreater(report['residual_floor'], 0.05)
        self.assertGreaterEqual(report['residual'], report['residual_floor'] - 1e-6)
        self.assertEqual(len(self.rows('inverse_density')), 64)

    def test_single_target_inverse_is_solvable(self):
        path = self.write_config({'inverse': {'mode': 'explicit', 'targets': [2 * math.pi / 3]}})
        self.run_command('run', 'inverse', path, out=self.out())
        self.assertLess(self.report('inverse')['residual'], 1e-8)

    def test_recorded_sweep(self):
        path = self.write_config({
            'seed': 12,
            'spacetime': {'kind': 'weak-field', 'mass': 0.0, 'r_min': 0.5, 'center': [1.5, 0.0, 0.0]},
            'scenario': SCENARIO,
            'sweep': {'parameter': 'mass', 'values': [0.0, 0.01]},
        })
        self.run_command('run', 'sweep', path, out=self.out(), nodes=256, record=True)
        report = self.report('sweep')
        self.assertFalse(report['partial'])
        self.assertEqual(report['gridpoints'], 2)
        self.assertEqual(SweepRun.objects.get().id, report['sweep_run_id'])
        gridpoints = self.rows('sweep_gridpoints')
        self.assertEqual([row['value'] for row in gridpoints], ['0.0', '0.01'])

    def test_failed_gridpoints_flag_partial_outputs(self):
        path = self.write_config({
            'spacetime': {'kind': 'weak-field', 'mass': 0.0, 'r_min': 0.5},
            'scenario': SCENARIO,
            'sweep': {'parameter': 'mass', 'values': [0.0, 0.4]},
        })
        code, error = self.failing_command('run', 'sweep', path, out=self.out(), nodes=256)
        self.assertEqual(code, 8)
        self.assertEqual(error['error_type'], 'PartialOutputs')
        report = self.report('sweep')
        self.assertTrue(report['partial'])
        self.assertFalse(report['records'][1]['success'])

    def test_worldviews(self):
        self.run_command('run', 'worldviews', str(CONFIGS / 'worldviews.json'), out=self.out())
        report = self.report('worldviews')
        self.assertTrue(report['observers'][0]['consistency']['passed'])
        self.assertTrue(report['functor']['contravariant'])
        self.assertFalse(report['measurement']['equal'])
        self.assertTrue(all(entry['success'] for entry in report['sieves']['algebras']))
        omega = {row['point']: int(row['omega_size']) for row in self.rows('worldviews_omega')}
        self.assertEqual(omega['p0'], 32)

    def test_missing_block_is_a_config_error(self):
        path = self.write_config({'scenario': SCENARIO})
        code, error = self.failing_command('run', 'inverse', path, out=self.out())
        self.assertEqual(code, 2)
        self.assertIn('inverse', error['fields'])
