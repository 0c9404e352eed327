import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from .causal_dag import CausalDag, Point
from .exceptions import StateSpaceTooLarge, UnknownField, UnknownPoint, WorldviewError

logger = logging.getLogger(__name__)

# field name -> point -> value
Assignment = Dict[str, Dict[Point, Any]]
Slot = Tuple[str, Point]


@dataclass(frozen=True)
class FieldSpec:
    """A named field with a finite alphabet at every point.

    Free fields take any combination of alphabet values. A derived field is fixed by ``rule``,
    which maps the free fields' assignment to the derived field's values.
    """

    name: str
    alphabets: Mapping[Point, Tuple[Any, ...]]
    rule: Optional[Callable[[Assignment], Mapping[Point, Any]]] = field(default=None, compare=False)

    @classmethod
    def uniform(cls, name: str, points: Iterable[Point], values: Sequence[Any], **kwargs) -> 'FieldSpec':
        return cls(name, {point: tuple(values) for point in points}, **kwargs)

    @property
    def derived(self) -> bool:
        return self.rule is not None


def observer_indicator(dag: CausalDag, chain: Sequence[Point], name: str = 'gamma_O') -> FieldSpec:
    """ℤ₂ indicator of a worldline: 1 on the chain, 0 elsewhere."""
    chain = set(dag.require_chain(chain))
    values = {point: int(point in chain) for point in dag.points}
    return FieldSpec.uniform(name, dag.points, (0, 1), rule=lambda assignment: values)


class FieldConfigSpace:
    """All configurations of a collection of fields over a causal DAG.

    A configuration is stored as a row of alphabet indices, one column per (field, point) slot.
    """

    def __init__(self, dag: CausalDag, fields: Sequence[FieldSpec]):
        names = [spec.name for spec in fields]
        if len(set(names)) != len(names):
            raise WorldviewError(f"Duplicate field names in {names}")
        self.dag = dag
        self.fields: Dict[str, FieldSpec] = {spec.name: spec for spec in fields}
        self.slots: List[Slot] = []
        self.alphabets: List[Tuple[Any, ...]] = []
        for spec in fields:
            for point in spec.alphabets:
                if point not in dag:
                    raise UnknownPoint(f"Field '{spec.name}' declares an alphabet at unknown point {point!r}")
            for point in dag.points:
                alphabet = tuple(spec.alphabets.get(point, ()))
                if not alphabet:
                    raise WorldviewError(f"Field '{spec.name}' has an empty alphabet at {point!r}")
                if len(set(alphabet)) != len(alphabet):
                    raise WorldviewError(f"Field '{spec.name}' repeats alphabet values at {point!r}")
                self.slots.append((spec.name, point))
                self.alphabets.append(alphabet)
        self._columns = {slot: index for index, slot in enumerate(self.slots)}
        self.free_columns = [i for i, (name, _) in enumerate(self.slots) if not self.fields[name].derived]
        self.derived_columns = [i for i, (name, _) in enumerate(self.slots) if self.fields[name].derived]

    @property
    def width(self) -> int:
        return len(self.slots)

    def require_field(self, name: str) -> FieldSpec:
        if name not in self.fields:
            raise UnknownField(f"No field named '{name}'")
        return self.fields[name]

    def column(self, name: str, point: Point) -> int:
        self.require_field(name)
        self.dag.require(point)
        return self._columns[(name, point)]

    def columns_at(self, points: Iterable[Point]) -> List[int]:
        points = set(points)
        return [i for i, (_, point) in enumerate(self.slots) if point in points]

    def code(self, column: int, value: Any) -> Optional[int]:
        try:
            return self.alphabets[column].index(value)
        except ValueError:
            return None

    def decode(self, row: np.ndarray) -> Assignment:
        assignment: Assignment = {name: {} for name in self.fields}
        for index, (name, point) in enumerate(self.slots):
            assignment[name][point] = self.alphabets[index][int(row[index])]
        return assignment

    def encode(self, assignment: Mapping[str, Mapping[Point, Any]]) -> np.ndarray:
        """Row for a free-field assignment; derived fields are filled in from their rules.

        Free slots missing from ``assignment`` take the first value of their alphabet.
        """
        for name in assignment:
            self.require_field(name)
        row = np.zeros(self.width, dtype=np.int64)
        for index in self.free_columns:
            name, point = self.slots[index]
            if point not in assignment.get(name, {}):
                continue
            code = self.code(index, assignment[name][point])
            if code is None:
                raise WorldviewError(f"{assignment[name][point]!r} is not in the alphabet of "
                                     f"'{name}' at {point!r}")
            row[index] = code
        self._derive(row[None, :])
        return row

    def _derive(self, rows: np.ndarray) -> None:
        """Fill the derived columns in place."""
        if not self.derived_columns:
            return
        derived = [name for name, spec in self.fields.items() if spec.derived]
        for row in rows:
            assignment = self.decode(row)
            free = {name: values for name, values in assignment.items() if not self.fields[name].derived}
            for name in derived:
                values = self.fields[name].rule(free)
                for point in self.dag.points:
                    index = self._columns[(name, point)]
                    code = self.code(index, values[point])
                    if code is None:
                        raise WorldviewError(f"Rule for '{name}' produced {values[point]!r} at {point!r}, "
                                             f"outside its alphabet")
                    row[index] = code

    def count(self, fixed: Mapping[int, int]) -> int:
        return math.prod(len(self.alphabets[i]) for i in self.free_columns if i not in fixed)

    def enumerate(self, fixed: Mapping[int, int] = None, cap: Optional[int] = None) -> np.ndarray:
        """All configurations agreeing with ``fixed`` (column -> code), derived columns included."""
        fixed = dict(fixed or {})
        cap = int(cap or settings.WORLDVIEW_STATE_CAP)
        open_columns = [i for i in self.free_columns if i not in fixed and len(self.alphabets[i]) > 1]
        total = self.count(fixed)
        if total > cap:
            raise StateSpaceTooLarge(f"{total} configurations exceed the cap of {cap}")

        rows = np.zeros((total, self.width), dtype=np.int64)
        for index, code in fixed.items():
            if index in self.free_columns:
                rows[:, index] = code
        if open_columns:
            grids = np.meshgrid(*[np.arange(len(self.alphabets[i])) for i in open_columns], indexing='ij')
            rows[:, open_columns] = np.stack([grid.reshape(-1) for grid in grids], axis=1)
        self._derive(rows)

        keep = np.ones(total, dtype=bool)
        for index in self.derived_columns:
            if index in fixed:
                keep &= rows[:, index] == fixed[index]
        rows = rows[keep]
        rows.setflags(write=False)
        logger.debug(f"Enumerated {len(rows)} of {total} candidate configurations")
        return rows
