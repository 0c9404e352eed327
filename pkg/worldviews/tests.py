import itertools

import numpy as np
from django.test import SimpleTestCase

from .causal_dag import CausalDag
from .consistency import check_consistency
from .dag_format import parse_dag
from .exceptions import (
    CyclicRelation, DagFormatError, PosetTooLarge, ShapeMismatch, StateSpaceTooLarge, UnknownField, UnknownPoint,
    WorldviewError, ZeroConditioningMass,
)
from .fields import FieldConfigSpace, FieldSpec, observer_indicator
from .functor import all_worldviews, event_algebra_functor
from .measurement import measurement_scenario
from .sieves import FinitePoset, SieveAlgebra, sieves
from .worldview import (
    build_worldview, conditioned_measure, event, observer_worldviews, product_measure,
)

DIAMOND = [('a', 'b'), ('a', 'c'), ('b', 'd'), ('c', 'd')]


def binary_space(dag, *extra):
    return FieldConfigSpace(dag, [FieldSpec.uniform('spin', dag.points, (0, 1)), *extra])


def random_marginals(space, rng):
    marginals = {}
    for index in space.free_columns:
        weight = rng.uniform(0.1, 0.9)
        marginals[space.slots[index]] = {0: weight, 1: 1.0 - weight}
    return marginals


class CausalDagTests(SimpleTestCase):

    def test_past_of_a_minimal_point_is_itself(self):
        dag = CausalDag(DIAMOND)
        self.assertEqual(dag.causal_past('a'), {'a'})

    def test_past_along_a_chain(self):
        dag = CausalDag.chain(['a', 'b', 'c'])
        self.assertEqual(dag.causal_past('c'), {'a', 'b', 'c'})

    def test_pasts_grow_along_the_order(self):
        dag = CausalDag.random(50, 0.08, seed=5)
        for p, q in itertools.product(dag.points, repeat=2):
            if dag.leq(p, q):
                self.assertLessEqual(dag.causal_past(p), dag.causal_past(q))

    def test_spacelike_points(self):
        dag = CausalDag(DIAMOND)
        self.assertTrue(dag.spacelike('b', 'c'))
        self.assertFalse(dag.spacelike('a', 'd'))
        self.assertEqual(dag.joint_past({'b'}, {'c'}), {'a'})

    def test_cycles_are_rejected(self):
        with self.assertRaises(CyclicRelation):
            CausalDag([('a', 'b'), ('b', 'c'), ('c', 'a')])
        with self.assertRaises(CyclicRelation):
            CausalDag([('a', 'a')])

    def test_unknown_point(self):
        with self.assertRaises(UnknownPoint):
            CausalDag(DIAMOND).causal_past('z')

    def test_chains_must_be_ordered(self):
        with self.assertRaises(WorldviewError):
            CausalDag(DIAMOND, chains=[('b', 'c')])


class WorldviewTests(SimpleTestCase):

    def test_everything_in_the_past_leaves_one_configuration(self):
        dag = CausalDag.chain(['a', 'b', 'c'])
        worldview = build_worldview(binary_space(dag), {'spin': {'a': 1, 'b': 0, 'c': 1}}, 'c')
        self.assertEqual(worldview.size, 1)
        self.assertEqual(worldview.assignment(0)['spin'], {'a': 1, 'b': 0, 'c': 1})

    def test_minimal_point_leaves_two_free_points(self):
        dag = CausalDag.chain(['a', 'b', 'c'])
        worldview = build_worldview(binary_space(dag), {}, 'a')
        self.assertEqual(worldview.size, 4)
        self.assertEqual(worldview.algebra_size, 16)

    def test_filtration_on_random_dags(self):
        rng = np.random.default_rng(21)
        for trial in range(100):
            dag = CausalDag.random(int(rng.integers(2, 13)), 0.3, seed=trial)
            space = binary_space(dag)
            truth = {'spin': {point: int(rng.integers(2)) for point in dag.points}}
            worldviews = all_worldviews(space, truth)
            for p, q in dag.comparable_pairs():
                self.assertTrue(worldviews[p].includes(worldviews[q]), (trial, p, q))

    def test_knowledge_depends_only_on_the_point(self):
        dag = CausalDag(DIAMOND)
        space = binary_space(dag, observer_indicator(dag, ('a', 'b', 'd'), 'first'),
                            observer_indicator(dag, ('a', 'c', 'd'), 'second'))
        truth = {'spin': {'a': 1, 'b': 0, 'c': 1, 'd': 0}}
        first = observer_worldviews(space, truth, ('a', 'b', 'd'))
        second = observer_worldviews(space, truth, ('a', 'c', 'd'))
        for point in ('a', 'd'):
            self.assertEqual(first[point].state_keys, second[point].state_keys)

    def test_state_cap(self):
        dag = CausalDag.antichain(['a', 'b', 'c', 'd', 'e'])
        with self.assertRaises(StateSpaceTooLarge):
            build_worldview(binary_space(dag), {}, 'a', cap=8)

    def test_empty_region_is_the_whole_space(self):
        worldview = build_worldview(binary_space(CausalDag(DIAMOND)), {}, 'a')
        self.assertEqual(len(event(worldview, 'spin', [], {})), worldview.size)

    def test_events_in_the_past_are_fixed(self):
        dag = CausalDag(DIAMOND)
        worldview = build_worldview(binary_space(dag), {'spin': {'a': 1, 'b': 1}}, 'b')
        self.assertEqual(len(event(worldview, 'spin', ['a', 'b'], 1)), worldview.size)
        self.assertEqual(len(event(worldview, 'spin', ['a'], 0)), 0)

    def test_free_point_splits_the_space(self):
        worldview = build_worldview(binary_space(CausalDag(DIAMOND)), {}, 'a')
        self.assertEqual(len(event(worldview, 'spin', ['d'], 1)), worldview.size // 2)

    def test_unknown_field(self):
        worldview = build_worldview(binary_space(CausalDag(DIAMOND)), {}, 'a')
        with self.assertRaises(UnknownField):
            event(worldview, 'charge', ['d'], 1)

    def test_conditioned_measure_is_normalized(self):
        dag = CausalDag(DIAMOND)
        space = binary_space(dag)
        prior = product_measure(space, random_marginals(space, np.random.default_rng(1)))
        worldview = conditioned_measure(build_worldview(space, {}, 'b'), prior)
        self.assertAlmostEqual(worldview.measure.sum(), 1.0, places=12)
        self.assertAlmostEqual(worldview.probability(worldview.full()), 1.0, places=12)

    def test_conditioning_on_a_null_event(self):
        worldview = build_worldview(binary_space(CausalDag(DIAMOND)), {}, 'a')
        with self.assertRaises(ZeroConditioningMass):
            conditioned_measure(worldview, lambda states: np.zeros(len(states)))


class ConsistencyTests(SimpleTestCase):

    def test_product_measures_pass_every_condition(self):
        rng = np.random.default_rng(8)
        for trial in range(100):
            dag = CausalDag.random(int(rng.integers(2, 9)), 0.35, seed=100 + trial)
            space = binary_space(dag)
            truth = {'spin': {point: int(rng.integers(2)) for point in dag.points}}
            chain = dag.longest_chain()
            worldviews = observer_worldviews(space, truth, chain,
                                             prior=product_measure(space, random_marginals(space, rng)))
            report = check_consistency(worldviews, chain)
            self.assertTrue(report.passed, (trial, report.as_dict()))

    def test_correlated_spacelike_points_fail_independence(self):
        dag = CausalDag(DIAMOND)
        space = binary_space(dag)
        b, c = space.column('spin', 'b'), space.column('spin', 'c')
        worldviews = observer_worldviews(space, {}, ('a',),
                                         prior=lambda states: (states[:, b] == states[:, c]).astype(float))
        report = check_consistency(worldviews)
        result = report['spacelike_independence']
        self.assertFalse(result.passed)
        self.assertIn('(b)', result.witness['A'])
        self.assertIn('(c)', result.witness['B'])
        self.assertAlmostEqual(result.witness['P(AB)'], 0.5)
        self.assertAlmostEqual(result.witness['P(A)P(B)'], 0.25)

    def test_single_point_is_vacuous(self):
        dag = CausalDag.antichain(['a'])
        space = binary_space(dag)
        worldviews = observer_worldviews(space, {}, ('a',), prior=product_measure(space))
        report = check_consistency(worldviews)
        self.assertTrue(report.passed)
        self.assertEqual(sum(result.checked for result in report.conditions.values()), 0)

    def test_zero_mass_conditioning_is_reported(self):
        dag = CausalDag.chain(['a', 'b'])
        space = binary_space(dag)
        column = space.column('spin', 'b')
        # the earlier observer is certain spin(b) = 1; the truth is 0
        earlier = conditioned_measure(build_worldview(space, {}, 'a'),
                                      lambda states: (states[:, column] == 1).astype(float))
        later = build_worldview(space, {}, 'b').with_measure([1.0])
        report = check_consistency({'a': earlier, 'b': later}, ('a', 'b'))
        self.assertTrue(report.passed)
        self.assertEqual(report['predictive_consistency'].zero_mass, 1)

    def test_inconsistent_update_is_caught(self):
        dag = CausalDag.chain(['a', 'b', 'c'])
        space = binary_space(dag)
        earlier = conditioned_measure(build_worldview(space, {}, 'a'), product_measure(space))
        later = build_worldview(space, {}, 'b').with_measure([0.9, 0.1])
        report = check_consistency({'a': earlier, 'b': later}, ('a', 'b'))
        self.assertFalse(report['predictive_consistency'].passed)


class MeasurementScenarioTests(SimpleTestCase):

    def setUp(self):
        self.dag = CausalDag([('p0', 'r'), ('r', 'p1'), ('r', 'p2'), ('d1', 'p1'), ('d2', 'p2')])

    def test_copied_outcomes_give_one_partition(self):
        report = measurement_scenario(self.dag, 'p0', ['r'], 'p1', 'p2')
        self.assertTrue(report.equal)
        self.assertEqual(len(report.partition_1[0]), report.worldview.size // 2)
        self.assertIsNone(report.witness())

    def test_independent_devices_split_the_partitions(self):
        report = measurement_scenario(self.dag, 'p0', ['r'], 'p1', 'p2', device_points=('d1', 'd2'))
        self.assertFalse(report.equal)
        self.assertEqual(report.worldview.size, 8)
        witness = report.witness()
        self.assertNotEqual(witness['chi']['d1'], witness['chi']['d2'])

    def test_events_partition_the_space(self):
        for devices in (None, ('d1', 'd2')):
            report = measurement_scenario(self.dag, 'p0', ['r'], 'p1', 'p2', device_points=devices)
            self.assertTrue(report.is_partition(report.partition_1))
            self.assertTrue(report.is_partition(report.partition_2))
            self.assertTrue(report.as_dict()['same_algebra'])

    def test_timelike_measurements_are_rejected(self):
        dag = CausalDag([('p0', 'r'), ('r', 'p1'), ('p1', 'p2')])
        with self.assertRaises(ShapeMismatch):
            measurement_scenario(dag, 'p0', ['r'], 'p1', 'p2')

    def test_devices_in_the_past_are_rejected(self):
        dag = CausalDag([('d1', 'p0'), ('p0', 'r'), ('r', 'p1'), ('r', 'p2'), ('d2', 'p2'), ('d1', 'p1')])
        with self.assertRaises(ShapeMismatch):
            measurement_scenario(dag, 'p0', ['r'], 'p1', 'p2', device_points=('d1', 'd2'))


class SieveTests(SimpleTestCase):

    def test_single_element(self):
        algebra = sieves(FinitePoset(['x'], [[True]]), 'x')
        self.assertEqual(len(algebra), 2)
        self.assertTrue(algebra.is_boolean())

    def test_two_chain_is_not_boolean(self):
        algebra = sieves(FinitePoset.from_dag(CausalDag.chain(['x', 'y'])), 'y')
        self.assertEqual(len(algebra), 3)
        middle = next(mask for mask in algebra.elements if algebra.members(mask) == ['x'])
        self.assertEqual(algebra.neg(middle), algebra.bottom)
        self.assertNotEqual(algebra.neg(algebra.neg(middle)), middle)
        self.assertFalse(algebra.is_boolean())
        self.assertTrue(algebra.check_laws().holds)

    def test_heyting_laws_on_random_posets(self):
        for seed in range(50):
            poset = FinitePoset.random(6, 0.4, seed=seed)
            for element in poset.elements:
                report = sieves(poset, element).check_laws()
                self.assertTrue(report.holds, (seed, element, report.as_dict()))

    def test_implication_is_the_largest_admissible_sieve(self):
        poset = FinitePoset.from_dag(CausalDag(DIAMOND))
        algebra = SieveAlgebra(poset, 'd')
        for a, b in itertools.product(algebra.elements, repeat=2):
            admissible = [c for c in algebra.elements if algebra.le(algebra.meet(c, a), b)]
            self.assertEqual(algebra.implies(a, b), max(admissible, key=lambda c: bin(c).count('1')))
            for c in admissible:
                self.assertTrue(algebra.le(c, algebra.implies(a, b)))

    def test_sieves_are_down_closed(self):
        algebra = SieveAlgebra(FinitePoset.from_dag(CausalDag(DIAMOND)), 'd')
        self.assertTrue(all(algebra.is_sieve(mask) for mask in algebra.elements))
        # ∅, {a}, {a,b}, {a,c}, {a,b,c}, {a,b,c,d}
        self.assertEqual(len(algebra), 6)

    def test_size_cap(self):
        poset = FinitePoset.from_dag(CausalDag.chain([f"x{i}" for i in range(5)]))
        with self.assertRaises(PosetTooLarge):
            sieves(poset, 'x4', cap=4)

    def test_order_must_be_transitive(self):
        leq = np.eye(3, dtype=bool)
        leq[0, 1] = leq[1, 2] = True
        with self.assertRaises(WorldviewError):
            FinitePoset(['a', 'b', 'c'], leq)


class EventAlgebraFunctorTests(SimpleTestCase):

    def test_chain_algebras_shrink(self):
        dag = CausalDag.chain(['a', 'b', 'c'])
        functor = event_algebra_functor(all_worldviews(binary_space(dag), {}))
        sizes = functor.sizes()
        self.assertEqual([2 ** sizes[p] for p in 'abc'], [16, 4, 2])
        self.assertTrue(functor.contravariant)
        self.assertTrue(functor.functorial)

    def test_antichain_algebras_are_alike(self):
        dag = CausalDag.antichain(['a', 'b', 'c'])
        functor = event_algebra_functor(all_worldviews(binary_space(dag), {}))
        self.assertEqual(set(functor.sizes().values()), {4})
        poset = functor.algebra_poset()
        self.assertEqual(len(poset), 3)
        self.assertEqual(int(poset.leq.sum()), 3)

    def test_missing_points_are_filled_in(self):
        dag = CausalDag(DIAMOND)
        space = binary_space(dag)
        functor = event_algebra_functor({'a': build_worldview(space, {}, 'a')})
        self.assertEqual(set(functor.worldviews), set(dag.points))

    def test_sieves_on_the_algebra_poset(self):
        dag = CausalDag.chain(['a', 'b', 'c'])
        poset = event_algebra_functor(all_worldviews(binary_space(dag), {})).algebra_poset()
        top = poset.maximal()
        self.assertEqual(len(top), 1)
        algebra = sieves(poset, top[0])
        self.assertEqual(len(algebra), 4)
        self.assertTrue(algebra.check_laws().holds)


class DagFormatTests(SimpleTestCase):
    TEXT = """
    # diamond with one observer
    a b
    a c
    b d
    c d   # trailing comment
    point e
    alphabet spin * 0 1
    alphabet spin e 0
    true spin b 1
    chain a b d
    """

    def test_parse(self):
        document = parse_dag(self.TEXT)
        self.assertEqual(set(document.dag.points), {'a', 'b', 'c', 'd', 'e'})
        self.assertTrue(document.dag.leq('a', 'd'))
        self.assertEqual(document.chains, (('a', 'b', 'd'),))
        self.assertEqual(document.field_names, ['spin'])
        self.assertEqual(document.true_config, {'spin': {'b': 1}})
        self.assertIn('gamma_O1', document.space.fields)
        self.assertEqual(document.space.alphabets[document.space.column('spin', 'e')], (0,))

    def test_parsed_document_builds_worldviews(self):
        document = parse_dag(self.TEXT)
        worldview = build_worldview(document.space, document.true_config, 'b')
        # c and d free; a, b and e fixed
        self.assertEqual(worldview.size, 4)

    def test_bad_line_reports_its_number(self):
        with self.assertRaises(DagFormatError) as caught:
            parse_dag("a b\na b c\n")
        self.assertEqual(caught.exception.line, 2)
        self.assertEqual(caught.exception.exit_code, 2)

    def test_unknown_point_in_alphabet(self):
        with self.assertRaises(DagFormatError):
            parse_dag("a b\nalphabet spin z 0 1\n")

    def test_true_value_outside_alphabet(self):
        with self.assertRaises(DagFormatError):
            parse_dag("a b\nalphabet spin * 0 1\ntrue spin a 2\n")

    def test_cycle(self):
        with self.assertRaises(CyclicRelation):
            parse_dag("a b\nb a\n")
