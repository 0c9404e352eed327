import math

import numpy as np
from django.test import SimpleTestCase

from dynamics.distributions import AngleDistribution

from .chsh import STANDARD_ANGLES, chsh_statistic, maximize_chsh
from .exceptions import InvalidInverseProblem, InverseNoConvergence
from .fourier import fourier_feasibility
from .problem import InverseProblem, assemble_system
from .solver import project_simplex, solve_nnls


def disc_search_floor(targets, radial=200, angular=720):
    """Brute-force misfit minimum over the moment disc."""
    theta = np.asarray(targets)
    best = math.inf
    for radius in np.linspace(0.0, 1.0, radial + 1):
        phi = np.linspace(0.0, 2 * math.pi, angular, endpoint=False)
        c2, s2 = radius * np.cos(phi), radius * np.sin(phi)
        misfit = 0.5 * (np.outer(c2, np.cos(2 * theta)) - np.outer(s2, np.sin(2 * theta))) + np.cos(theta)
        best = min(best, float(np.sqrt((misfit ** 2).mean(axis=1)).min()))
    return best


class InverseProblemTests(SimpleTestCase):

    def test_right_hand_side(self):
        _, rhs = assemble_system(InverseProblem((0.0,)))
        self.assertAlmostEqual(rhs[0], -0.5)
        _, rhs = assemble_system(InverseProblem((math.pi,)))
        self.assertAlmostEqual(rhs[0], 1.5)

    def test_matrix_entries_are_bounded_by_the_bin_width(self):
        problem = InverseProblem.dense(16, bins=32)
        matrix, rhs = assemble_system(problem)
        self.assertEqual(matrix.shape, (17, 32))
        self.assertTrue(np.all(matrix[:-1] >= 0.0) and np.all(matrix[:-1] <= problem.spacing + 1e-15))
        np.testing.assert_allclose(matrix[-1], problem.spacing)
        self.assertEqual(rhs[-1], 1.0)

    def test_empty_targets_are_rejected(self):
        with self.assertRaises(InvalidInverseProblem):
            InverseProblem(())

    def test_negative_regularization_is_rejected(self):
        with self.assertRaises(InvalidInverseProblem):
            InverseProblem((0.1,), regularization=-1.0)

    def test_direction_targets(self):
        problem = InverseProblem.from_directions((0.0, math.pi / 4), (math.pi / 8, 3 * math.pi / 8))
        self.assertEqual(problem.mode, 'directions')
        self.assertEqual(len(problem.targets), 3)


class SimplexProjectionTests(SimpleTestCase):

    def test_projection_lands_on_the_simplex(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            q = project_simplex(rng.normal(size=12) * 3)
            self.assertTrue(np.all(q >= 0.0))
            self.assertAlmostEqual(q.sum(), 1.0, places=12)

    def test_points_on_the_simplex_are_fixed(self):
        q = np.array([0.2, 0.0, 0.5, 0.3])
        np.testing.assert_allclose(project_simplex(q), q, atol=1e-15)


class SolverTests(SimpleTestCase):

    def test_single_target_is_solvable(self):
        problem = InverseProblem((2 * math.pi / 3,), bins=96)
        solution = solve_nnls(problem)
        self.assertLess(solution.residual, 1e-8)
        self.assertTrue(solution.feasible)
        c2, s2 = solution.moments
        self.assertAlmostEqual(c2, -0.5, places=6)
        self.assertAlmostEqual(s2, math.sqrt(3) / 2, places=6)

    def test_dense_grid_has_a_floor(self):
        problem = InverseProblem.dense(64)
        solution = solve_nnls(problem)
        report = fourier_feasibility(problem.targets)
        self.assertFalse(solution.feasible)
        self.assertFalse(report.feasible)
        self.assertGreater(report.lower_bound, 0.05)
        self.assertGreaterEqual(solution.residual, report.lower_bound - 1e-6)
        self.assertAlmostEqual(report.lower_bound, disc_search_floor(problem.targets), delta=1e-4)

    def test_quarter_turn_targets(self):
        problem = InverseProblem((math.pi / 2, 3 * math.pi / 2))
        solution = solve_nnls(problem)
        self.assertLess(solution.residual, 1e-8)
        self.assertAlmostEqual(solution.moments[0], 0.0, places=8)

    def test_moments_stay_in_the_disc(self):
        for targets in ((0.3,), (0.3, 2.0), (0.0, 1.0, 2.5, 4.0)):
            solution = solve_nnls(InverseProblem(targets))
            c2, s2 = solution.moments
            self.assertLessEqual(c2 ** 2 + s2 ** 2, 1.0 + 1e-9)

    def test_beats_random_densities(self):
        problem = InverseProblem((0.4, 1.9, 3.3))
        solution = solve_nnls(problem)
        K, r = problem.kernel(), problem.target_values()
        rng = np.random.default_rng(12)
        for _ in range(100):
            masses = rng.dirichlet(np.ones(problem.bins) * 0.3)
            residual = math.sqrt(((K @ masses - r) ** 2).mean())
            self.assertLessEqual(solution.residual, residual + 1e-12)

    def test_relaxation_bound_is_below_the_solution(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            targets = tuple(rng.uniform(0.0, 2 * math.pi, size=rng.integers(1, 6)))
            solution = solve_nnls(InverseProblem(targets))
            self.assertLessEqual(fourier_feasibility(targets).lower_bound, solution.residual + 1e-6)

    def test_solver_is_deterministic(self):
        problem = InverseProblem((0.5, 2.5), regularization=1e-3)
        first, second = solve_nnls(problem), solve_nnls(problem)
        np.testing.assert_array_equal(first.density.density, second.density.density)
        self.assertEqual(first.residual, second.residual)

    def test_iteration_cap_keeps_the_best_iterate(self):
        problem = InverseProblem((2 * math.pi / 3, 0.4, 1.0), bins=96)
        with self.assertRaises(InverseNoConvergence) as caught:
            solve_nnls(problem, max_iter=3, tol=1e-300)
        best = caught.exception.best
        self.assertIsNotNone(best)
        self.assertFalse(best.converged)
        self.assertIn('best', caught.exception.to_dict())

    def test_solution_satisfies_the_assembled_system(self):
        problem = InverseProblem((0.4, 1.9, 3.3))
        solution = solve_nnls(problem)
        matrix, rhs = assemble_system(problem)
        misfit = matrix @ solution.density.density - rhs
        self.assertAlmostEqual(misfit[-1], 0.0, places=10)
        self.assertAlmostEqual(math.sqrt((misfit[:-1] ** 2).mean()), solution.residual, places=10)

    def test_report_fields(self):
        report = solve_nnls(InverseProblem((1.0,))).as_dict()
        for key in ('targets', 'residual', 'C2', 'S2', 'feasible', 'density_bins'):
            self.assertIn(key, report)


class FeasibilityTests(SimpleTestCase):

    def test_single_target_constraint(self):
        theta = 0.9
        report = fourier_feasibility((theta,))
        constraint = report.constraints[0]
        self.assertAlmostEqual(constraint['rhs'], -math.cos(theta))
        self.assertAlmostEqual(constraint['C2_coefficient'], 0.5 * math.cos(2 * theta))
        self.assertAlmostEqual(constraint['S2_coefficient'], -0.5 * math.sin(2 * theta))

    def test_tangent_target_touches_the_disc(self):
        report = fourier_feasibility((2 * math.pi / 3,))
        self.assertTrue(report.feasible)
        self.assertAlmostEqual(report.moments[0], -0.5, places=9)
        self.assertAlmostEqual(report.moments[1], math.sqrt(3) / 2, places=9)

    def test_quarter_turns_force_a_vanishing_cosine_moment(self):
        report = fourier_feasibility((math.pi / 2, 3 * math.pi / 2))
        self.assertTrue(report.feasible)
        self.assertAlmostEqual(report.moments[0], 0.0, places=12)

    def test_unreachable_target_sits_on_the_boundary(self):
        report = fourier_feasibility((0.0,))
        self.assertFalse(report.feasible)
        self.assertTrue(report.on_boundary)
        # −1 = ½C₂ is out of reach; C₂ = −1 leaves ½
        self.assertAlmostEqual(report.lower_bound, 0.5, places=9)


class ChshTests(SimpleTestCase):

    def test_uniform_density_has_no_correlation(self):
        self.assertAlmostEqual(chsh_statistic(AngleDistribution.uniform(64)), 0.0, places=12)

    def test_point_masses_stay_inside_the_envelope(self):
        for psi in np.arange(64) * (2 * math.pi / 64):
            self.assertLessEqual(chsh_statistic(AngleDistribution.point_mass(psi, 64), STANDARD_ANGLES),
                                 math.sqrt(2) + 1e-9)

    def test_random_angle_sets_stay_inside_the_envelope(self):
        rng = np.random.default_rng(8)
        dist = AngleDistribution.point_mass(0.0, 64)
        for _ in range(50):
            self.assertLessEqual(chsh_statistic(dist, rng.uniform(0, 2 * math.pi, 4)), math.sqrt(2) + 1e-9)

    def test_maximum_is_root_two(self):
        maximum = maximize_chsh(bins=64, restarts=16, seed=2)
        self.assertAlmostEqual(maximum.value, math.sqrt(2), delta=1e-3)
        self.assertLess(maximum.value, 2.0)
        self.assertFalse(maximum.as_dict()['exceeds_classical_bound'])
