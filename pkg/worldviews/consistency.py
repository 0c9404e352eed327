import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .causal_dag import Point
from .worldview import Event, WorldviewTheory, fixing_event, slot_event

logger = logging.getLogger(__name__)

CONSISTENCY_TOL = 1e-10

CONDITIONS = ('spacelike_independence', 'predictive_consistency', 'conditional_independence')


@dataclass
class ConditionResult:
    name: str
    checked: int = 0
    zero_mass: int = 0
    witness: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.witness is None

    def fail(self, witness: Dict[str, Any]):
        if self.witness is None:
            self.witness = witness

    def as_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'checked': self.checked,
            'zero_mass_conditions': self.zero_mass,
            'witness': self.witness,
        }


@dataclass
class ConsistencyReport:
    chain: List[Point]
    conditions: Dict[str, ConditionResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.conditions.values())

    def __getitem__(self, name: str) -> ConditionResult:
        return self.conditions[name]

    def as_dict(self) -> Dict[str, Any]:
        return {
            'chain': [str(point) for point in self.chain],
            'passed': self.passed,
            'conditions': {name: result.as_dict() for name, result in self.conditions.items()},
        }


def elementary_events(worldview: WorldviewTheory) -> List[Event]:
    """Nontrivial events fixing one field at one point."""
    space = worldview.space
    events = []
    for index, slot in enumerate(space.slots):
        if slot[1] in worldview.past or len(space.alphabets[index]) < 2:
            continue
        for code in range(len(space.alphabets[index])):
            candidate = slot_event(worldview, slot, code)
            if 0 < len(candidate) < worldview.size:
                events.append(candidate)
    return events


def _check_spacelike(worldview: WorldviewTheory, events: Sequence[Event], result: ConditionResult, tol: float):
    dag = worldview.space.dag
    measure = worldview.require_measure()
    for first, second in combinations(events, 2):
        (x,), (y,) = first.support, second.support
        if not dag.spacelike(x, y):
            continue
        result.checked += 1
        joint = float(measure[first.mask & second.mask].sum())
        product = float(measure[first.mask].sum()) * float(measure[second.mask].sum())
        if abs(joint - product) > tol:
            result.fail({'point': str(worldview.point), 'A': first.label, 'B': second.label,
                         'P(AB)': joint, 'P(A)P(B)': product})


def _check_predictive(earlier: WorldviewTheory, later: WorldviewTheory, result: ConditionResult, tol: float):
    # additivity reduces every A ⊆ Ω_q to its atoms
    given = fixing_event(earlier, later.past)
    mass = earlier.probability(given)
    if mass <= tol:
        result.zero_mass += 1
        logger.warning(f"P_{earlier.point}(F|J⁻({later.point})) = 0; predictive consistency not testable there")
        return
    position = {key: i for i, key in enumerate(map(tuple, earlier.states.tolist()))}
    earlier_measure, later_measure = earlier.require_measure(), later.require_measure()
    for j, key in enumerate(map(tuple, later.states.tolist())):
        result.checked += 1
        predicted = float(earlier_measure[position[key]]) / mass
        if abs(predicted - later_measure[j]) > tol:
            result.fail({'p': str(earlier.point), 'q': str(later.point), 'atom': list(key),
                         'P_q(A)': float(later_measure[j]), 'P_p(A|F_q)': predicted})
            return


def _cells(worldview: WorldviewTheory, region: FrozenSet[Point]) -> np.ndarray:
    """Label each configuration by its values on ``region``."""
    columns = worldview.space.columns_at(region)
    if not columns:
        return np.zeros(worldview.size, dtype=np.int64)
    _, cells = np.unique(worldview.states[:, columns], axis=0, return_inverse=True)
    return cells.reshape(-1)


def _check_conditional(worldview: WorldviewTheory, events: Sequence[Event], result: ConditionResult, tol: float):
    dag = worldview.space.dag
    measure = worldview.require_measure()
    partitions: Dict[FrozenSet[Point], np.ndarray] = {}
    for first, second in combinations(events, 2):
        if first.support == second.support:
            continue
        joint_past = dag.joint_past(first.support, second.support)
        if joint_past not in partitions:
            partitions[joint_past] = _cells(worldview, joint_past)
        cells = partitions[joint_past]
        size = int(cells.max()) + 1 if len(cells) else 0
        mass = np.bincount(cells, weights=measure, minlength=size)
        mass_a = np.bincount(cells, weights=measure * first.mask, minlength=size)
        mass_b = np.bincount(cells, weights=measure * second.mask, minlength=size)
        mass_ab = np.bincount(cells, weights=measure * (first.mask & second.mask), minlength=size)
        live = mass > tol
        result.zero_mass += int(np.count_nonzero(~live))
        result.checked += int(np.count_nonzero(live))
        gap = np.abs(mass_ab[live] / mass[live] - (mass_a[live] / mass[live]) * (mass_b[live] / mass[live]))
        if gap.size and gap.max() > tol:
            result.fail({'point': str(worldview.point), 'A': first.label, 'B': second.label,
                         'joint_past': sorted(map(str, joint_past)), 'defect': float(gap.max())})


def check_consistency(worldviews: Mapping[Point, WorldviewTheory], chain: Optional[Iterable[Point]] = None,
                      tol: float = CONSISTENCY_TOL) -> ConsistencyReport:
    """Exhaustive check of spacelike independence, predictive consistency and conditional independence.

    ``worldviews`` maps the points of an observer chain to worldviews carrying measures. Events are
    those fixing one field at one point; conditioning events of zero mass are counted, not failed.
    """
    chain = list(chain if chain is not None else worldviews)
    if chain:
        worldviews[chain[0]].space.dag.require_chain(chain)
    report = ConsistencyReport(chain, {name: ConditionResult(name) for name in CONDITIONS})
    for point in chain:
        worldview = worldviews[point]
        events = elementary_events(worldview)
        _check_spacelike(worldview, events, report['spacelike_independence'], tol)
        _check_conditional(worldview, events, report['conditional_independence'], tol)
    for earlier, later in combinations(chain, 2):
        _check_predictive(worldviews[earlier], worldviews[later], report['predictive_consistency'], tol)

    for name, result in report.conditions.items():
        if result.zero_mass:
            logger.warning(f"{name}: {result.zero_mass} conditioning events with zero mass were skipped")
        if not result.passed:
            logger.info(f"{name} fails: {result.witness}")
    logger.info(f"Consistency over {len(chain)} worldviews: {'pass' if report.passed else 'fail'}")
    return report
