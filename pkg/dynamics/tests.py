import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from .distributions import AngleDistribution, JointAngleDistribution
from .exceptions import InvalidDistribution, ResolutionTooLow, SeedRequired
from .monte_carlo import AngleSampler, mc_probability
from .probabilities import (
    chsh_value, closed_form_table, correlation, iv_closed_form, iv_quadrature, outcome_covariance, pe_marginal,
    pe_probability, pe_table, po_marginals, po_probability, po_table, quad_table, quantum_table, quantum_target,
    simp_probability, simp_table,
)
from .quadrature import periodic_simpson
from .response import OUTCOMES, ResponseFunction

MALUS = ResponseFunction.malus()
PAIRS = [(A, B) for A in OUTCOMES for B in OUTCOMES]


def malus(outcome, theta):
    return math.cos(theta) ** 2 if outcome == 1 else math.sin(theta) ** 2


class ResponseFunctionTests(SimpleTestCase):

    def test_outcomes_are_complete(self):
        theta = np.linspace(-7.0, 7.0, 301)
        for response in (MALUS, ResponseFunction.from_function(lambda t: 0.5 + 0.3 * np.sin(t), 64)):
            np.testing.assert_allclose(response(1, theta) + response(-1, theta), 1.0, atol=1e-12)

    def test_custom_table_is_periodic_and_bounded(self):
        response = ResponseFunction.from_function(lambda t: np.cos(t) ** 2, 256)
        theta = np.linspace(0.0, 2 * math.pi, 97)
        np.testing.assert_allclose(response.plus(theta), response.plus(theta + 2 * math.pi), atol=1e-12)
        self.assertTrue(np.all((response.plus(theta) >= 0.0) & (response.plus(theta) <= 1.0)))

    def test_table_values_outside_unit_interval_are_rejected(self):
        with self.assertRaises(InvalidDistribution):
            ResponseFunction('custom-table', np.full(16, 1.2))

    def test_unknown_outcome(self):
        with self.assertRaises(ValueError):
            MALUS(0, 0.3)


class AngleDistributionTests(SimpleTestCase):

    def test_rejects_unnormalised_density(self):
        with self.assertRaises(InvalidDistribution):
            AngleDistribution(np.ones(16))

    def test_rejects_negative_density(self):
        density = np.full(16, 1.0 / (2 * math.pi))
        density[0], density[1] = -0.1, density[1] + 0.1
        with self.assertRaises(InvalidDistribution):
            AngleDistribution(density)

    def test_rejects_too_few_bins(self):
        with self.assertRaises(InvalidDistribution):
            AngleDistribution.uniform(4)

    def test_point_mass_carries_unit_mass_on_one_node(self):
        dist = AngleDistribution.point_mass(math.pi / 2, 64)
        self.assertEqual(dist.support().tolist(), [16])
        self.assertAlmostEqual(dist.masses.sum(), 1.0, places=12)

    def test_point_mass_between_nodes_keeps_its_angle(self):
        dist = AngleDistribution.point_mass(0.02, 64)
        self.assertEqual(dist.support().tolist(), [0])
        self.assertAlmostEqual(float(dist.nodes[0]), 0.02, places=15)
        dist = AngleDistribution.point_mass(-0.3, 64)
        self.assertAlmostEqual(math.remainder(float(dist.nodes[dist.support()[0]]) + 0.3, 2 * math.pi), 0.0,
                               places=12)

    def test_joint_point_mass_keeps_both_angles(self):
        joint = JointAngleDistribution.point_mass(0.05, 0.03, 64)
        (i, j), = np.argwhere(joint.masses > 0.0)
        self.assertAlmostEqual(float(joint.nodes_A[i]), 0.05, places=15)
        self.assertAlmostEqual(float(joint.nodes_B[j]), 0.03, places=15)
        psi = joint.psi_marginal()
        self.assertAlmostEqual(float(psi.nodes[psi.support()[0]]), 0.02, places=15)

    def test_samples_are_binned_to_the_nearest_node(self):
        dist = AngleDistribution.from_samples([0.01, -0.01, math.pi + 0.02, 2 * math.pi - 0.001], 32)
        self.assertAlmostEqual(dist.masses[0], 0.75)
        self.assertAlmostEqual(dist.masses[16], 0.25)

    def test_psi_marginal_of_a_diagonal_joint(self):
        psi = AngleDistribution.from_function(lambda t: 1.0 + 0.5 * np.cos(t), 64)
        joint = JointAngleDistribution.from_psi(psi)
        np.testing.assert_allclose(joint.psi_marginal().density, psi.density, atol=1e-12)
        np.testing.assert_allclose(joint.marginal_B().density, AngleDistribution.uniform(64).density, atol=1e-12)

    def test_moments_of_uniform_vanish(self):
        c, s = AngleDistribution.uniform(64).moments(2)
        self.assertLess(abs(c) + abs(s), 1e-12)


class ClosedFormTests(SimpleTestCase):

    def test_equal_outcomes(self):
        self.assertAlmostEqual(iv_closed_form(1, 1, 0.0), 3 / 8, places=15)
        self.assertAlmostEqual(iv_closed_form(-1, -1, 0.0), 3 / 8, places=15)

    def test_unequal_outcomes(self):
        self.assertAlmostEqual(iv_closed_form(1, -1, 0.0), 1 / 8, places=15)

    def test_four_outcomes_sum_to_one(self):
        for theta_minus in np.linspace(0.0, 2 * math.pi, 17):
            self.assertAlmostEqual(closed_form_table(theta_minus).total, 1.0, places=12)

    def test_quantum_targets(self):
        self.assertAlmostEqual(quantum_target(1, 1, math.pi / 2), 0.25, places=15)
        self.assertAlmostEqual(quantum_target(1, -1, 0.0), 0.5, places=15)
        for theta_ab in np.linspace(0.0, 2 * math.pi, 257):
            self.assertAlmostEqual(quantum_table(theta_ab).total, 1.0, delta=1e-12)
            self.assertAlmostEqual(quantum_target(-1, -1, theta_ab), 0.5 * math.sin(theta_ab / 2) ** 2, delta=1e-15)

    def test_quantum_correlation_is_minus_cosine(self):
        self.assertAlmostEqual(correlation(quantum_table(math.pi / 3)), -0.5, places=12)


class QuadratureTests(SimpleTestCase):

    def setUp(self):
        self.uniform = AngleDistribution.uniform(64)

    def test_matches_closed_form_on_a_grid(self):
        grid = np.arange(8) * (2 * math.pi / 8)
        for theta_ab in grid:
            for psi in grid:
                for A, B in PAIRS:
                    quad = iv_quadrature(MALUS, self.uniform, A, B, theta_ab, 0.0, psi, 0.0)
                    closed = iv_closed_form(A, B, theta_ab + psi + math.pi)
                    self.assertLess(abs(quad - closed), 1e-10)

    def test_aligned_observers(self):
        self.assertAlmostEqual(iv_quadrature(MALUS, self.uniform, 1, 1, 0.0, 0.0), 3 / 8, delta=1e-12)

    def test_custom_table_reproduces_malus(self):
        table = ResponseFunction.from_function(lambda t: np.cos(t) ** 2, 4096)
        for theta_ab in (0.0, 0.4, 1.3, 2.9):
            quad = iv_quadrature(table, self.uniform, 1, -1, theta_ab, 0.0)
            self.assertAlmostEqual(quad, iv_closed_form(1, -1, theta_ab + math.pi), delta=1e-6)

    def test_point_mass_polarisation_reads_off_the_integrand(self):
        dist = AngleDistribution.point_mass(0.0, 64)
        theta_a, theta_b = 0.7, 0.2
        for A, B in PAIRS:
            expected = malus(A, theta_a) * malus(B, theta_b - math.pi)
            self.assertAlmostEqual(iv_quadrature(MALUS, dist, A, B, theta_a, theta_b), expected, places=14)

    def test_too_few_nodes(self):
        with self.assertRaises(ResolutionTooLow):
            iv_quadrature(MALUS, self.uniform, 1, 1, 0.0, 0.0, nodes=32)

    def test_too_few_nodes_for_a_binned_distribution(self):
        peaked = AngleDistribution.from_function(lambda t: np.exp(np.cos(t)), 64)
        with self.assertRaises(ResolutionTooLow):
            iv_quadrature(MALUS, peaked, 1, 1, 0.0, 0.0, nodes=32)

    def test_constituent_integrals(self):
        theta_a, theta_b = 0.9, 0.35
        theta_minus = theta_a - theta_b

        def theta_plus(theta_v):
            return theta_a + theta_b - 2.0 * theta_v

        self.assertAlmostEqual(periodic_simpson(lambda v: np.cos(theta_plus(v)) ** 2), 0.5, delta=1e-10)
        self.assertAlmostEqual(periodic_simpson(lambda v: np.cos(theta_plus(v)) * math.cos(theta_minus)),
                               0.0, delta=1e-10)
        self.assertAlmostEqual(periodic_simpson(lambda v: np.full_like(v, math.cos(theta_minus) ** 2)),
                               math.cos(theta_minus) ** 2, delta=1e-10)

    def test_quadrature_table_sums_to_one(self):
        self.assertAlmostEqual(quad_table(MALUS, self.uniform, 1.1, 0.4, 0.3, 0.0).total, 1.0, delta=1e-12)


class ConditionedProbabilityTests(SimpleTestCase):

    def test_point_masses_give_the_bare_response(self):
        zero = AngleDistribution.point_mass(0.0, 64)
        context = (0.4, 1.9)
        for A, B in PAIRS:
            expected = malus(A, 0.4) * malus(B, 1.9)
            self.assertAlmostEqual(pe_probability(MALUS, zero, zero, A, B, context), expected, places=14)

    def test_uniform_outside_holonomy_gives_a_quarter(self):
        uniform = AngleDistribution.uniform(64)
        for A, B in PAIRS:
            self.assertAlmostEqual(pe_probability(MALUS, uniform, uniform, A, B, (0.3, 2.2)), 0.25, places=12)

    def test_factorises_exactly(self):
        dist_A = AngleDistribution.from_function(lambda t: np.exp(np.cos(t)), 64)
        dist_B = AngleDistribution.from_function(lambda t: 1.0 + 0.9 * np.sin(3 * t), 64)
        context = (0.8, -0.3)
        table = pe_table(MALUS, dist_A, dist_B, context)
        self.assertAlmostEqual(table.total, 1.0, delta=1e-9)
        self.assertEqual(table.p(1, 1), pe_marginal(MALUS, dist_A, 1, 0.8) * pe_marginal(MALUS, dist_B, 1, -0.3))
        self.assertLess(abs(outcome_covariance(table)), 1e-14)


class GeneralProbabilityTests(SimpleTestCase):

    def setUp(self):
        self.uniform = AngleDistribution.uniform(64)
        self.zero = AngleDistribution.point_mass(0.0, 64)

    def test_degenerate_holonomies_collapse_to_closed_form(self):
        zero = AngleDistribution.point_mass(0.0, 64)
        joint = JointAngleDistribution.product(zero, zero)
        theta_a, theta_b = 1.0, 0.25
        for A, B in PAIRS:
            po = po_probability(MALUS, self.uniform, joint, self.zero, self.zero, A, B, theta_a, theta_b)
            self.assertAlmostEqual(po, iv_closed_form(A, B, theta_a - theta_b + math.pi), delta=1e-12)

    def test_diagonal_joint_reduces_to_simplified_dynamics(self):
        for psi in (AngleDistribution.point_mass(0.0, 64),
                    AngleDistribution.from_function(lambda t: 1.0 + 0.8 * np.cos(2 * t - 0.5), 64)):
            joint = JointAngleDistribution.from_psi(psi)
            for A, B in PAIRS:
                po = po_probability(MALUS, self.uniform, joint, self.zero, self.zero, A, B, math.pi / 5, 0.0)
                self.assertAlmostEqual(po, simp_probability(psi, A, B, math.pi / 5), delta=1e-12)

    def test_generic_joint_is_normalised(self):
        i, j = np.indices((64, 64))
        joint = JointAngleDistribution.from_masses(np.exp(np.cos(i * 0.1) + np.sin(j * 0.3) * np.cos(i * 0.2)))
        theta_A2 = AngleDistribution.from_function(lambda t: np.exp(np.sin(t)), 64)
        theta_B2 = AngleDistribution.from_function(lambda t: 1.0 + 0.5 * np.cos(t), 64)
        table = po_table(MALUS, self.uniform, joint, theta_A2, theta_B2, 0.6, 1.7)
        self.assertAlmostEqual(table.total, 1.0, delta=1e-8)

    def test_diagonal_joint_does_not_factorise(self):
        joint = JointAngleDistribution.from_psi(AngleDistribution.point_mass(math.pi / 8, 64))
        theta_a, theta_b = math.pi / 4, 0.0
        p_pp = po_probability(MALUS, self.uniform, joint, self.zero, self.zero, 1, 1, theta_a, theta_b)
        p_A, p_B = po_marginals(MALUS, self.uniform, joint, self.zero, self.zero, theta_a, theta_b)
        self.assertGreater(abs(p_pp - p_A * p_B), 0.01)
        # the covariance is an eighth of cos 2θ_−
        self.assertAlmostEqual(p_pp - p_A * p_B, math.cos(2 * (theta_a + math.pi / 8)) / 8, delta=1e-12)

    def test_aligned_diagonal_is_a_positive_covariance(self):
        joint = JointAngleDistribution.from_psi(AngleDistribution.point_mass(0.0, 64))
        table = po_table(MALUS, self.uniform, joint, self.zero, self.zero, 0.0, 0.0)
        self.assertAlmostEqual(outcome_covariance(table), 1 / 8, delta=1e-12)

    def test_off_grid_holonomies_are_not_rounded(self):
        joint = JointAngleDistribution.point_mass(0.05, 0.03, 64)
        theta_a, theta_b = math.pi / 4, math.pi / 8
        po = po_table(MALUS, self.uniform, joint, self.zero, self.zero, theta_a, theta_b)
        quad = quad_table(MALUS, self.uniform, theta_a, theta_b, 0.05, 0.03)
        closed = closed_form_table(theta_a - theta_b + 0.02 + math.pi)
        np.testing.assert_allclose(po.table, closed.table, atol=1e-12)
        np.testing.assert_allclose(quad.table, closed.table, atol=1e-12)
        simp = simp_table(joint.psi_marginal(), theta_a - theta_b)
        np.testing.assert_allclose(simp.table, closed.table, atol=1e-12)

    def test_coarse_joint_grid(self):
        joint = JointAngleDistribution.uniform(32)
        with self.assertRaises(ResolutionTooLow):
            po_probability(MALUS, self.uniform, joint, self.zero, self.zero, 1, 1, 0.0, 0.0)


class SimplifiedDynamicsTests(SimpleTestCase):

    def test_point_mass_at_zero(self):
        dist = AngleDistribution.point_mass(0.0, 64)
        self.assertAlmostEqual(simp_probability(dist, 1, 1, 0.0), 3 / 8, places=15)

    def test_uniform_is_a_quarter(self):
        dist = AngleDistribution.uniform(64)
        for theta_ab in (0.0, 0.7, 2.0):
            self.assertAlmostEqual(simp_probability(dist, 1, 1, theta_ab), 0.25, places=12)

    def test_four_outcomes_sum_to_one(self):
        dist = AngleDistribution.from_function(lambda t: np.exp(2 * np.cos(t)), 64)
        self.assertAlmostEqual(simp_table(dist, 1.234).total, 1.0, places=12)

    def test_off_grid_point_mass_matches_closed_form(self):
        dist = AngleDistribution.point_mass(0.02, 64)
        for A, B in PAIRS:
            self.assertAlmostEqual(simp_probability(dist, A, B, 0.7), iv_closed_form(A, B, 0.72 + math.pi), places=14)

    def test_flat_chsh_value(self):
        dist = AngleDistribution.point_mass(0.0, 64)
        e = [correlation(simp_table(dist, a - b))
             for a, b in ((0.0, math.pi / 8), (0.0, 3 * math.pi / 8), (math.pi / 4, math.pi / 8),
                          (math.pi / 4, 3 * math.pi / 8))]
        self.assertAlmostEqual(chsh_value(*e), math.sqrt(2), places=12)


class MonteCarloTests(SimpleTestCase):

    def setUp(self):
        self.uniform = AngleDistribution.uniform(64)

    def test_agrees_with_closed_form(self):
        cells, passing = 0, 0
        for k, theta_ab in enumerate((0.0, math.pi / 8, math.pi / 4, math.pi / 2)):
            for m, psi in enumerate((0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 4)):
                sampler = AngleSampler(self.uniform, psi=AngleDistribution.point_mass(psi, 64))
                estimate = mc_probability(1000 + 4 * k + m, 10 ** 6, sampler, MALUS, theta_ab, 0.0)
                for A, B in PAIRS:
                    expected = iv_closed_form(A, B, theta_ab + psi + math.pi)
                    index = (OUTCOMES.index(A), OUTCOMES.index(B))
                    cells += 1
                    if abs(estimate.probabilities.p(A, B) - expected) <= 3 * estimate.probabilities.stderr[index]:
                        passing += 1
        self.assertGreaterEqual(passing / cells, 0.95)

    def test_same_seed_same_counts_for_any_thread_count(self):
        sampler = AngleSampler(self.uniform, psi=AngleDistribution.point_mass(0.0, 64))
        first = mc_probability(7, 50_000, sampler, MALUS, 0.3, 0.0, threads=1, chunk_size=4096)
        second = mc_probability(7, 50_000, sampler, MALUS, 0.3, 0.0, threads=4, chunk_size=4096)
        np.testing.assert_array_equal(first.counts, second.counts)
        self.assertEqual(first.probabilities.table.tolist(), second.probabilities.table.tolist())

    def test_counts_cover_every_sample(self):
        sampler = AngleSampler(self.uniform, psi=self.uniform)
        estimate = mc_probability(3, 12_345, sampler, MALUS, 0.0, 0.0, chunk_size=1000)
        self.assertEqual(int(estimate.counts.sum()), 12_345)

    def test_fixed_angles_show_no_covariance(self):
        zero = AngleDistribution.point_mass(0.0, 64)
        sampler = AngleSampler(zero, psi=AngleDistribution.point_mass(math.pi / 8, 64))
        estimate = mc_probability(11, 400_000, sampler, MALUS, 0.6, 0.0)
        p = estimate.probabilities
        p_A, p_B = p.marginal_A(1), p.marginal_B(1)
        sigma = math.sqrt(p_A * (1 - p_A) * p_B * (1 - p_B) / estimate.n_samples)
        self.assertLess(abs(outcome_covariance(p)), 3 * sigma)

    def test_joint_sampler_tracks_general_dynamics(self):
        zero = AngleDistribution.point_mass(0.0, 64)
        joint = JointAngleDistribution.from_psi(AngleDistribution.point_mass(math.pi / 8, 64))
        sampler = AngleSampler(self.uniform, joint=joint, theta_A2=zero, theta_B2=zero)
        estimate = mc_probability(5, 400_000, sampler, MALUS, math.pi / 4, 0.0)
        expected = po_table(MALUS, self.uniform, joint, zero, zero, math.pi / 4, 0.0)
        np.testing.assert_array_less(np.abs(estimate.probabilities.table - expected.table),
                                     4 * estimate.probabilities.stderr + 1e-12)

    def test_off_grid_psi_is_sampled_at_its_angle(self):
        sampler = AngleSampler(self.uniform, psi=AngleDistribution.point_mass(0.02, 64))
        estimate = mc_probability(17, 400_000, sampler, MALUS, math.pi / 8, 0.0)
        expected = closed_form_table(math.pi / 8 + 0.02 + math.pi)
        np.testing.assert_array_less(np.abs(estimate.probabilities.table - expected.table),
                                     4 * estimate.probabilities.stderr + 1e-12)

    def test_missing_seed(self):
        sampler = AngleSampler(self.uniform, psi=self.uniform)
        with self.assertRaises(SeedRequired):
            mc_probability(None, 10_000, sampler, MALUS, 0.0, 0.0)

    @override_settings(MC_REQUIRE_SEED=False)
    def test_missing_seed_outside_reproducibility_mode(self):
        sampler = AngleSampler(self.uniform, psi=self.uniform)
        estimate = mc_probability(None, 10_000, sampler, MALUS, 0.0, 0.0)
        self.assertEqual(int(estimate.counts.sum()), 10_000)

    def test_too_few_samples(self):
        sampler = AngleSampler(self.uniform, psi=self.uniform)
        with self.assertRaises(ResolutionTooLow):
            mc_probability(1, 999, sampler, MALUS, 0.0, 0.0)

    def test_sampler_needs_one_holonomy_source(self):
        with self.assertRaises(ValueError):
            AngleSampler(self.uniform)
