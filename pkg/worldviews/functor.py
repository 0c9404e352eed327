import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from .causal_dag import CausalDag, Point
from .fields import FieldConfigSpace
from .sieves import FinitePoset
from .worldview import WorldviewTheory, build_worldview

logger = logging.getLogger(__name__)


def all_worldviews(space: FieldConfigSpace, true_config: Mapping[str, Mapping[Point, Any]],
                   cap: Optional[int] = None) -> Dict[Point, WorldviewTheory]:
    return {point: build_worldview(space, true_config, point, cap=cap) for point in space.dag.points}


@dataclass
class EventAlgebraFunctor:
    """p ↦ Λ_p on a causal DAG, with p ≤ q sent to the inclusion Λ_q ⊆ Λ_p."""

    dag: CausalDag
    worldviews: Dict[Point, WorldviewTheory]
    violations: List[Tuple[Point, Point]] = field(default_factory=list)
    composition_failures: List[Tuple[Point, Point, Point]] = field(default_factory=list)

    @property
    def contravariant(self) -> bool:
        return not self.violations

    @property
    def functorial(self) -> bool:
        return not self.composition_failures

    def sizes(self) -> Dict[Point, int]:
        return {point: worldview.size for point, worldview in self.worldviews.items()}

    def algebra_classes(self) -> List[Tuple[Point, ...]]:
        """Points grouped by identical algebras, in DAG order."""
        classes: Dict[frozenset, List[Point]] = {}
        for point in self.dag.points:
            classes.setdefault(self.worldviews[point].state_keys, []).append(point)
        return [tuple(points) for points in classes.values()]

    def algebra_poset(self) -> FinitePoset:
        """The distinct Λ_p ordered by subalgebra inclusion."""
        classes = self.algebra_classes()
        labels = ['L[' + ','.join(map(str, points)) + ']' for points in classes]
        representative = {label: self.worldviews[points[0]] for label, points in zip(labels, classes)}
        return FinitePoset.from_relation(labels, lambda a, b: representative[b].includes(representative[a]))

    def as_dict(self) -> Dict[str, Any]:
        return {
            'omega_sizes': {str(point): size for point, size in self.sizes().items()},
            'restrictions': [[str(p), str(q)] for p, q in self.dag.comparable_pairs()],
            'algebras': [[str(point) for point in points] for points in self.algebra_classes()],
            'contravariant': self.contravariant,
            'functorial': self.functorial,
            'violations': [[str(p), str(q)] for p, q in self.violations],
        }


def event_algebra_functor(worldviews: Mapping[Point, WorldviewTheory]) -> EventAlgebraFunctor:
    """Check Λ_p ⊇ Λ_q on every comparable pair and that restrictions compose along p ≤ q ≤ r."""
    dag = next(iter(worldviews.values())).space.dag
    missing = [point for point in dag.points if point not in worldviews]
    if missing:
        worldviews = dict(worldviews)
        reference = next(iter(worldviews.values()))
        true_config = reference.space.decode(reference.truth)
        for point in missing:
            worldviews[point] = build_worldview(reference.space, true_config, point)
    functor = EventAlgebraFunctor(dag, dict(worldviews))
    pairs = dag.comparable_pairs()
    for p, q in pairs:
        if not functor.worldviews[p].includes(functor.worldviews[q]):
            functor.violations.append((p, q))
    for p, q in pairs:
        for r in dag.causal_future(q) - {q}:
            direct = functor.worldviews[p].includes(functor.worldviews[r])
            composed = functor.worldviews[p].includes(functor.worldviews[q]) and \
                functor.worldviews[q].includes(functor.worldviews[r])
            if composed and not direct:
                functor.composition_failures.append((p, q, r))
    logger.info(f"Event-algebra functor on {len(dag)} points: contravariant={functor.contravariant}, "
                f"functorial={functor.functorial}")
    return functor
