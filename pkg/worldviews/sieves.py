import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from .causal_dag import CausalDag
from .exceptions import PosetTooLarge, UnknownPoint, WorldviewError

logger = logging.getLogger(__name__)

LAW_CHECK_LIMIT = 128


class FinitePoset:
    """Elements with a reflexive order matrix: ``leq[i, j]`` iff element i ≤ element j."""

    def __init__(self, elements: Sequence[Hashable], leq: np.ndarray):
        leq = np.array(leq, dtype=bool)
        n = len(elements)
        if leq.shape != (n, n):
            raise WorldviewError(f"Order matrix of shape {leq.shape} for {n} elements")
        if not leq.diagonal().all():
            raise WorldviewError("Order is not reflexive")
        if np.any(leq & leq.T & ~np.eye(n, dtype=bool)):
            raise WorldviewError("Order is not antisymmetric")
        if n and np.any((leq.astype(int) @ leq.astype(int) > 0) & ~leq):
            raise WorldviewError("Order is not transitive")
        self.elements = tuple(elements)
        self.leq = leq
        self.leq.setflags(write=False)
        self._index = {element: i for i, element in enumerate(self.elements)}

    @classmethod
    def from_relation(cls, elements: Sequence[Hashable], leq: Callable[[Any, Any], bool]) -> 'FinitePoset':
        return cls(elements, [[leq(a, b) for b in elements] for a in elements])

    @classmethod
    def from_dag(cls, dag: CausalDag) -> 'FinitePoset':
        return cls.from_relation(dag.points, dag.leq)

    @classmethod
    def random(cls, n: int, edge_probability: float = 0.4, seed: Optional[int] = None) -> 'FinitePoset':
        return cls.from_dag(CausalDag.random(n, edge_probability, seed=seed))

    def __len__(self) -> int:
        return len(self.elements)

    def index(self, element: Hashable) -> int:
        if element not in self._index:
            raise UnknownPoint(f"{element!r} is not an element of the poset")
        return self._index[element]

    def down_set(self, element: Hashable) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.leq[:, self.index(element)])]

    def maximal(self) -> List[Hashable]:
        n = len(self)
        strict = self.leq & ~np.eye(n, dtype=bool)
        return [self.elements[i] for i in range(n) if not strict[i].any()]


@dataclass
class LawReport:
    sieves: int
    triples: int
    failures: Dict[str, Optional[Tuple[int, ...]]]

    @property
    def holds(self) -> bool:
        return all(witness is None for witness in self.failures.values())

    def as_dict(self) -> Dict[str, Any]:
        return {
            'sieves': self.sieves,
            'triples_checked': self.triples,
            'holds': self.holds,
            'failures': {law: list(witness) if witness else None for law, witness in self.failures.items()},
        }


class SieveAlgebra:
    """Sieves at an element L of a finite poset: the down-closed subsets of ↓L.

    Sieves are bit masks over ↓L; meet is intersection, join is union.
    """

    def __init__(self, poset: FinitePoset, element: Hashable, cap: Optional[int] = None):
        cap = int(cap or settings.SIEVE_POSET_CAP)
        self.poset = poset
        self.element = element
        self.base = poset.down_set(element)
        size = len(self.base)
        if size > cap:
            raise PosetTooLarge(f"↓{element!r} has {size} elements, above the cap of {cap}")
        # bit i of a sieve stands for base[i]
        self._below = [self._mask(j for j in range(size) if poset.leq[self.base[j], self.base[i]])
                       for i in range(size)]
        self.top = (1 << size) - 1
        self.bottom = 0
        self.elements: Tuple[int, ...] = tuple(sorted(self._enumerate()))
        logger.debug(f"{len(self.elements)} sieves on ↓{element!r} ({size} elements)")

    @staticmethod
    def _mask(indices) -> int:
        mask = 0
        for i in indices:
            mask |= 1 << i
        return mask

    def _enumerate(self) -> List[int]:
        # ascending linear extension: an element may join once everything below it is in
        order = sorted(range(len(self.base)), key=lambda i: bin(self._below[i]).count("1"))
        sieves = []

        def extend(position: int, sieve: int):
            if position == len(order):
                sieves.append(sieve)
                return
            i = order[position]
            extend(position + 1, sieve)
            strictly_below = self._below[i] & ~(1 << i)
            if sieve & strictly_below == strictly_below:
                extend(position + 1, sieve | (1 << i))

        extend(0, 0)
        return sieves

    def __len__(self) -> int:
        return len(self.elements)

    def is_sieve(self, mask: int) -> bool:
        if mask & ~self.top:
            return False
        return all(mask & below == below for i, below in enumerate(self._below) if mask >> i & 1)

    def members(self, mask: int) -> List[Hashable]:
        return [self.poset.elements[index] for i, index in enumerate(self.base) if mask >> i & 1]

    @staticmethod
    def meet(a: int, b: int) -> int:
        return a & b

    @staticmethod
    def join(a: int, b: int) -> int:
        return a | b

    def le(self, a: int, b: int) -> bool:
        return a & ~b == 0

    def implies(self, a: int, b: int) -> int:
        """Largest sieve c with c ∧ a ≤ b: every x whose down-set meets a only inside b."""
        return self._mask(i for i, below in enumerate(self._below) if below & a & ~b == 0)

    def neg(self, a: int) -> int:
        return self.implies(a, self.bottom)

    def is_boolean(self) -> bool:
        return all(self.neg(self.neg(a)) == a for a in self.elements)

    def check_laws(self) -> LawReport:
        """Exhaustive Heyting-law check over every pair and triple of sieves."""
        k = len(self.elements)
        if k > LAW_CHECK_LIMIT:
            raise PosetTooLarge(f"{k} sieves on ↓{self.element!r}; exhaustive law checks stop at {LAW_CHECK_LIMIT}")
        sieves = np.array(self.elements, dtype=np.int64)
        implication = np.array([[self.implies(a, b) for b in self.elements] for a in self.elements],
                               dtype=np.int64)
        a = sieves[:, None, None]
        b = sieves[None, :, None]
        c = sieves[None, None, :]
        imp_ab = implication[:, :, None]

        adjunction = ((c & ~imp_ab) == 0) == (((c & a) & ~b) == 0)
        distributive = (a & (b | c)) == ((a & b) | (a & c))
        modus_ponens = ((sieves[:, None] & implication) & ~sieves[None, :]) == 0
        identity = implication.diagonal() == self.top
        closed = np.isin(implication, sieves)

        def witness(ok: np.ndarray) -> Optional[Tuple[int, ...]]:
            bad = np.argwhere(~ok)
            if not len(bad):
                return None
            return tuple(int(sieves[i]) for i in bad[0])

        failures = {
            'implication_is_sieve': witness(closed),
            'adjunction': witness(adjunction),
            'distributivity': witness(distributive),
            'modus_ponens': witness(modus_ponens),
            'self_implication': witness(identity),
        }
        report = LawReport(k, k ** 3, failures)
        if not report.holds:
            logger.warning(f"Heyting laws fail on ↓{self.element!r}: {failures}")
        return report

    def as_dict(self) -> Dict[str, Any]:
        return {
            'element': str(self.element),
            'base': [str(self.poset.elements[i]) for i in self.base],
            'sieves': [[str(member) for member in self.members(mask)] for mask in self.elements],
            'boolean': self.is_boolean(),
            'laws': self.check_laws().as_dict() if len(self) <= LAW_CHECK_LIMIT else None,
        }


def sieves(poset: FinitePoset, element: Hashable, cap: Optional[int] = None) -> SieveAlgebra:
    return SieveAlgebra(poset, element, cap=cap)
