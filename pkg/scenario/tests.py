import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from geometry.exceptions import ChartEscape, NoConvergence
from geometry.helper_functions import wrap_angle, wrap_pi
from geometry.spacetimes import Minkowski, WeakField

from .angles import decompose_holonomy, extract_angles
from .builder import build_geometry
from .config import ExperimentConfig
from .exceptions import InvalidExperimentConfig, NoInterception

DIRECTIONS_A = (0.0, math.pi / 4, math.pi / 3)
DIRECTIONS_B = (math.pi / 8, 3 * math.pi / 8)


def experiment(**overrides):
    options = {
        'p_O': (0.0, 0.0, 0.0, 0.0),
        'tau_E': 1.0,
        'measurement_dirs_A': DIRECTIONS_A,
        'measurement_dirs_B': DIRECTIONS_B,
        'observer_speed': 0.5,
    }
    options.update(overrides)
    return ExperimentConfig(**options)


def weak_field(mass):
    return WeakField(mass, 0.5, center=(1.5, 0.0, 0.3))


class ExperimentConfigTests(SimpleTestCase):

    def test_rejects_non_positive_emission_time(self):
        with self.assertRaises(InvalidExperimentConfig):
            experiment(tau_E=0.0)

    def test_rejects_superluminal_observers(self):
        with self.assertRaises(InvalidExperimentConfig):
            experiment(observer_speed=1.0)

    def test_rejects_empty_direction_lists(self):
        with self.assertRaises(InvalidExperimentConfig):
            experiment(measurement_dirs_B=())

    def test_rejects_timelike_beam_axis(self):
        config = experiment(d_O=(1.0, 0.0, 0.0, 0.2))
        with self.assertRaises(InvalidExperimentConfig):
            config.frame_O(Minkowski())

    def test_beam_axis_must_have_unit_length(self):
        with self.assertRaises(InvalidExperimentConfig):
            experiment(d_O=(0.0, 0.0, 0.0, 2.0)).frame_O(Minkowski())
        frame = experiment(d_O=(0.0, 0.0, 0.0, 1.0)).frame_O(Minkowski())
        np.testing.assert_allclose(frame.vectors[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12)

    def test_round_trips_through_a_dict(self):
        config = experiment(frame_rotation=0.3)
        self.assertEqual(ExperimentConfig.from_dict(config.as_dict()), experiment(frame_rotation=0.3, step=0.02))


class FlatGeometryTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.flat = Minkowski()
        cls.geom = build_geometry(cls.flat, experiment())

    def test_emission_event_lies_on_the_source_worldline(self):
        np.testing.assert_allclose(self.geom.p_E, [1.0, 0.0, 0.0, 0.0], atol=1e-10)

    def test_observers_sit_where_the_photons_arrive(self):
        np.testing.assert_allclose(self.geom.p_A, [2.0, 0.0, 0.0, 1.0], atol=1e-8)
        np.testing.assert_allclose(self.geom.p_B, [2.0, 0.0, 0.0, -1.0], atol=1e-8)

    def test_detection_events_are_spacelike_separated(self):
        separation = self.geom.p_A - self.geom.p_B
        self.assertGreater(self.flat.inner(self.geom.p_A, separation, separation), 0.0)

    def test_light_cone_points(self):
        np.testing.assert_allclose(self.geom.p_alpha, [2 / 3, 0.0, 0.0, 1 / 3], atol=1e-8)
        np.testing.assert_allclose(self.geom.p_beta, [2 / 3, 0.0, 0.0, -1 / 3], atol=1e-8)

    def test_residuals_are_small(self):
        self.assertEqual(self.geom.invariant_failures(), [])

    def test_holonomies_vanish(self):
        decomposition = decompose_holonomy(self.flat, self.geom, theta_v=0.4)
        for angle in decomposition.as_tuple():
            self.assertLess(abs(angle), 1e-9)

    def test_observer_angle_is_the_source_angle(self):
        angles = extract_angles(self.flat, self.geom, 2, 0, math.pi / 6)
        self.assertAlmostEqual(angles.theta_A, math.pi / 6, places=9)
        self.assertAlmostEqual(angles.theta_av, math.pi / 6, places=9)

    def test_b_side_picks_up_a_half_turn(self):
        angles = extract_angles(self.flat, self.geom, 0, 1, 0.2)
        expected = wrap_angle(3 * math.pi / 8 - 0.2 - math.pi)
        self.assertAlmostEqual(wrap_pi(angles.theta_B - expected), 0.0, places=9)

    def test_planes_are_not_tilted(self):
        angles = extract_angles(self.flat, self.geom, 1, 1, 0.0)
        self.assertLess(angles.phi_A, 1e-7)
        self.assertLess(angles.phi_B, 1e-7)

    def test_invalid_choice_index(self):
        with self.assertRaises(IndexError):
            extract_angles(self.flat, self.geom, 3, 0, 0.0)

    def test_geometry_report_lists_all_points(self):
        report = self.geom.as_dict()
        self.assertEqual(set(report['points']), {'p_O', 'p_E', 'p_A', 'p_B', 'p_alpha', 'p_beta'})
        self.assertEqual(report['curves']['gamma_EA']['kind'], 'null-geodesic')


class WeakFieldGeometryTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spacetime = weak_field(0.01)
        cls.geom = build_geometry(cls.spacetime, experiment())

    def test_residuals_are_small(self):
        self.assertEqual(self.geom.invariant_failures(), [])

    def test_causal_characters(self):
        self.assertEqual(self.geom.gamma_OE.kind, 'timelike-geodesic')
        self.assertEqual(self.geom.arm_A.gamma_EX.kind, 'null-geodesic')
        self.assertEqual(self.geom.arm_B.gamma_OX.kind, 'timelike-geodesic')

    def test_angle_decomposition_holds(self):
        for i in range(len(DIRECTIONS_A)):
            for j in range(len(DIRECTIONS_B)):
                angles = extract_angles(self.spacetime, self.geom, i, j, 0.3)
                for name, defect in angles.invariant_defects().items():
                    self.assertLess(defect, 1e-6, msg=f'{name} at ({i}, {j})')

    def test_holonomy_is_nonzero(self):
        decomposition = decompose_holonomy(self.spacetime, self.geom)
        self.assertGreater(abs(decomposition.theta_A1), 1e-6)

    def test_holonomy_does_not_depend_on_the_polarisation(self):
        first = decompose_holonomy(self.spacetime, self.geom, 0.0)
        second = decompose_holonomy(self.spacetime, self.geom, 1.1)
        np.testing.assert_allclose(first.as_tuple(), second.as_tuple(), atol=1e-9)


class HolonomyScalingTests(SimpleTestCase):

    def test_loops_add_up_across_masses(self):
        for mass in (0.002, 0.005, 0.01, 0.02, 0.04):
            spacetime = weak_field(mass)
            geom = build_geometry(spacetime, experiment(step=0.04))
            decomposition = decompose_holonomy(spacetime, geom)
            self.assertLess(decomposition.additivity_defect_A, 1e-6, msg=f'mass {mass}')
            self.assertLess(decomposition.additivity_defect_B, 1e-6, msg=f'mass {mass}')

    def test_doubling_the_mass_grows_the_holonomy(self):
        angles = []
        for mass in (0.01, 0.02):
            spacetime = weak_field(mass)
            geom = build_geometry(spacetime, experiment(step=0.04))
            angles.append(abs(decompose_holonomy(spacetime, geom).theta_A1))
        self.assertGreater(angles[1], angles[0])

    def test_frame_rotation_leaves_observer_angles_alone(self):
        spacetime = weak_field(0.01)
        results = []
        for rotation in (0.0, 0.7):
            geom = build_geometry(spacetime, experiment(frame_rotation=rotation, step=0.04))
            results.append(extract_angles(spacetime, geom, 1, 0, 0.25))
        self.assertAlmostEqual(wrap_pi(results[0].theta_A - results[1].theta_A), 0.0, places=6)
        self.assertAlmostEqual(wrap_pi(results[0].theta_B - results[1].theta_B), 0.0, places=6)
        self.assertAlmostEqual(results[0].theta_A1, results[1].theta_A1, places=6)


class FailureTests(SimpleTestCase):

    def test_observers_leaving_the_chart(self):
        with self.assertRaises(ChartEscape):
            build_geometry(Minkowski(chart_bound=1.5), experiment())

    def test_unsteerable_observer_is_no_interception(self):
        with mock.patch('scenario.builder.connect_geodesic', side_effect=NoConvergence('stalled')):
            with self.assertRaises(NoInterception):
                build_geometry(Minkowski(), experiment())

    def test_failures_carry_the_geometry_exit_code(self):
        self.assertEqual(NoInterception('x').exit_code, 3)
        self.assertEqual(InvalidExperimentConfig('x').exit_code, 2)
