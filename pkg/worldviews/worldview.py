import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .causal_dag import Point
from .exceptions import WorldviewError, ZeroConditioningMass
from .fields import Assignment, FieldConfigSpace, Slot

logger = logging.getLogger(__name__)

MEASURE_TOL = 1e-12

# maps the configuration rows of a worldview to nonnegative weights
Prior = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Event:
    """A subset of Ω_p, held as a mask over the worldview's configurations, with its support."""

    mask: np.ndarray
    support: FrozenSet[Point] = frozenset()
    label: str = ''

    def __and__(self, other: 'Event') -> 'Event':
        return Event(self.mask & other.mask, self.support | other.support, f"({self.label} & {other.label})")

    def __or__(self, other: 'Event') -> 'Event':
        return Event(self.mask | other.mask, self.support | other.support, f"({self.label} | {other.label})")

    def __invert__(self) -> 'Event':
        return Event(~self.mask, self.support, f"~{self.label}")

    def __len__(self) -> int:
        return int(self.mask.sum())

    def same_states(self, other: 'Event') -> bool:
        return bool(np.array_equal(self.mask, other.mask))


@dataclass(frozen=True, eq=False)
class WorldviewTheory:
    """(Ω_p, Λ_p = 2^Ω_p, P_p): the configurations compatible with everything in J⁻(p)."""

    point: Point
    space: FieldConfigSpace
    truth: np.ndarray
    states: np.ndarray
    measure: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def algebra_size(self) -> int:
        return 2 ** self.size

    @cached_property
    def state_keys(self) -> FrozenSet[Tuple[int, ...]]:
        return frozenset(map(tuple, self.states.tolist()))

    @cached_property
    def past(self) -> FrozenSet[Point]:
        return self.space.dag.causal_past(self.point)

    def includes(self, other: 'WorldviewTheory') -> bool:
        """Ω_other ⊆ Ω_self, which is also Λ_other ⊆ Λ_self."""
        return other.state_keys <= self.state_keys

    def full(self) -> Event:
        return Event(np.ones(self.size, dtype=bool), frozenset(), 'Ω')

    def empty(self) -> Event:
        return Event(np.zeros(self.size, dtype=bool), frozenset(), '∅')

    def restrict(self, event_states: Iterable[Tuple[int, ...]], label: str = '') -> Event:
        """Event of this worldview made of the given configurations (those outside Ω_p are dropped)."""
        wanted = set(event_states)
        mask = np.array([tuple(row) in wanted for row in self.states.tolist()], dtype=bool)
        return Event(mask, frozenset(), label)

    def states_of(self, event: Event) -> FrozenSet[Tuple[int, ...]]:
        return frozenset(map(tuple, self.states[event.mask].tolist()))

    def assignment(self, index: int) -> Assignment:
        return self.space.decode(self.states[index])

    def with_measure(self, weights: Sequence[float]) -> 'WorldviewTheory':
        weights = np.array(weights, dtype=float)
        if weights.shape != (self.size,):
            raise WorldviewError(f"Measure has {weights.shape} entries for {self.size} configurations")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise WorldviewError("Measure weights must be finite and nonnegative")
        total = weights.sum()
        if total <= 0.0:
            raise ZeroConditioningMass(f"Measure at {self.point!r} has no mass")
        weights = weights / total
        weights.setflags(write=False)
        return replace(self, measure=weights)

    def require_measure(self) -> np.ndarray:
        if self.measure is None:
            raise WorldviewError(f"Worldview at {self.point!r} has no measure")
        return self.measure

    def probability(self, event: Event) -> float:
        return float(self.require_measure()[event.mask].sum())

    def conditional(self, event: Event, given: Event) -> float:
        mass = self.probability(given)
        if mass <= MEASURE_TOL:
            raise ZeroConditioningMass(f"Conditioning event {given.label or '?'} has zero mass at {self.point!r}")
        return float(self.require_measure()[event.mask & given.mask].sum()) / mass

    def as_dict(self) -> Dict[str, Any]:
        return {
            'point': str(self.point),
            'past': sorted(str(point) for point in self.past),
            'omega_size': self.size,
            'lambda_size': self.algebra_size if self.size <= 64 else f"2^{self.size}",
            'has_measure': self.measure is not None,
        }


def build_worldview(space: FieldConfigSpace, true_config: Mapping[str, Mapping[Point, Any]], p: Point,
                    cap: Optional[int] = None) -> WorldviewTheory:
    """Ω_p: every extension of the true fields on J⁻(p). Depends on p alone, not on who observes it."""
    truth = space.encode(true_config)
    truth.setflags(write=False)
    past = space.dag.causal_past(p)
    fixed = {index: int(truth[index]) for index in space.columns_at(past)}
    states = space.enumerate(fixed, cap=cap)
    logger.debug(f"Worldview at {p!r}: |J⁻| = {len(past)}, |Ω| = {len(states)}")
    return WorldviewTheory(p, space, truth, states)


def observer_worldviews(space: FieldConfigSpace, true_config: Mapping[str, Mapping[Point, Any]],
                        chain: Sequence[Point], prior: Optional[Prior] = None,
                        cap: Optional[int] = None) -> Dict[Point, WorldviewTheory]:
    """The probability theory of an observer at every point of its worldline."""
    chain = space.dag.require_chain(chain)
    worldviews = {}
    for point in chain:
        worldview = build_worldview(space, true_config, point, cap=cap)
        worldviews[point] = conditioned_measure(worldview, prior) if prior is not None else worldview
    logger.info(f"Built {len(worldviews)} worldviews along {list(chain)}")
    return worldviews


def event(worldview: WorldviewTheory, field_name: str, region: Iterable[Point], values: Any) -> Event:
    """E_p(field, values, region): configurations whose field takes ``values`` on ``region``.

    ``values`` is a point -> value mapping or one value for every point of the region.
    """
    space = worldview.space
    space.require_field(field_name)
    region = frozenset(space.dag.require(point) for point in region)
    mask = np.ones(worldview.size, dtype=bool)
    for point in region:
        value = values[point] if isinstance(values, Mapping) else values
        column = space.column(field_name, point)
        code = space.code(column, value)
        if code is None:
            mask[:] = False
            break
        mask &= worldview.states[:, column] == code
    label = f"{field_name}|{sorted(map(str, region))}"
    return Event(mask, region, label)


def slot_event(worldview: WorldviewTheory, slot: Slot, code: int) -> Event:
    name, point = slot
    column = worldview.space.column(name, point)
    value = worldview.space.alphabets[column][code]
    return Event(worldview.states[:, column] == code, frozenset([point]), f"{name}({point})={value!r}")


def fixing_event(worldview: WorldviewTheory, region: Iterable[Point],
                 reference: Optional[np.ndarray] = None) -> Event:
    """E_p(ℱ|_R): every field agrees with ``reference`` (default: the true configuration) on R."""
    region = frozenset(region)
    reference = worldview.truth if reference is None else reference
    columns = worldview.space.columns_at(region)
    mask = np.all(worldview.states[:, columns] == reference[columns], axis=1) if columns else \
        np.ones(worldview.size, dtype=bool)
    return Event(mask, region, f"F|{sorted(map(str, region))}")


def product_measure(space: FieldConfigSpace,
                    marginals: Optional[Mapping[Slot, Mapping[Any, float]]] = None) -> Prior:
    """Independent values at every free slot; uniform unless ``marginals`` gives weights."""
    tables = []
    for index in space.free_columns:
        alphabet = space.alphabets[index]
        weights = np.ones(len(alphabet))
        if marginals and space.slots[index] in marginals:
            given = marginals[space.slots[index]]
            weights = np.array([float(given.get(value, 0.0)) for value in alphabet])
            if np.any(weights < 0.0) or weights.sum() <= 0.0:
                raise WorldviewError(f"Marginal at {space.slots[index]} must be nonnegative with positive mass")
        tables.append((index, weights / weights.sum()))

    def prior(states: np.ndarray) -> np.ndarray:
        weights = np.ones(len(states))
        for index, table in tables:
            weights *= table[states[:, index]]
        return weights

    return prior


def conditioned_measure(worldview: WorldviewTheory, prior: Prior) -> WorldviewTheory:
    """P_p = prior conditioned on Ω_p."""
    weights = np.asarray(prior(worldview.states), dtype=float)
    if weights.sum() <= MEASURE_TOL:
        raise ZeroConditioningMass(f"The prior gives Ω at {worldview.point!r} zero mass")
    return worldview.with_measure(weights)
