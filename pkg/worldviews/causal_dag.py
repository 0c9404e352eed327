import logging
from typing import Any, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .exceptions import CyclicRelation, UnknownPoint, WorldviewError

logger = logging.getLogger(__name__)

Point = Hashable


class CausalDag:
    """Finite causal spacetime: points under the strict partial order generated by ``relations``.

    ``p ≤ q`` means p can influence q. Observer worldlines are chains of the order.
    """

    def __init__(self, relations: Iterable[Tuple[Point, Point]] = (), points: Iterable[Point] = (),
                 chains: Iterable[Sequence[Point]] = ()):
        graph = nx.DiGraph()
        graph.add_nodes_from(points)
        graph.add_edges_from(relations)
        loops = list(nx.selfloop_edges(graph))
        if loops:
            raise CyclicRelation(f"Point {loops[0][0]!r} cannot precede itself")
        if not nx.is_directed_acyclic_graph(graph):
            cycle = [edge[0] for edge in nx.find_cycle(graph)]
            raise CyclicRelation(f"Causal relation has a cycle through {cycle}")

        self.graph = nx.freeze(graph)
        self.closure = nx.transitive_closure_dag(graph)
        self.points: Tuple[Point, ...] = tuple(nx.lexicographical_topological_sort(graph, key=str))
        self._pasts: Dict[Point, FrozenSet[Point]] = {}
        self._futures: Dict[Point, FrozenSet[Point]] = {}
        self.chains: Tuple[Tuple[Point, ...], ...] = tuple(self.require_chain(chain) for chain in chains)
        logger.debug(f"Causal DAG with {len(self.points)} points and {self.closure.number_of_edges()} "
                     f"ordered pairs")

    @classmethod
    def chain(cls, points: Sequence[Point]) -> 'CausalDag':
        return cls(zip(points, points[1:]), points=points, chains=[points])

    @classmethod
    def antichain(cls, points: Sequence[Point]) -> 'CausalDag':
        return cls(points=points)

    @classmethod
    def random(cls, n: int, edge_probability: float = 0.3, seed: Optional[int] = None) -> 'CausalDag':
        """Random order on p0..p{n-1}; edges only run from lower to higher index."""
        graph = nx.gnp_random_graph(n, edge_probability, seed=seed, directed=True)
        names = [f"p{i}" for i in range(n)]
        relations = [(names[u], names[v]) for u, v in graph.edges if u < v]
        return cls(relations, points=names)

    def __contains__(self, point: Point) -> bool:
        return point in self.graph

    def __len__(self) -> int:
        return len(self.points)

    def require(self, point: Point) -> Point:
        if point not in self.graph:
            raise UnknownPoint(f"Point {point!r} is not in the causal DAG")
        return point

    def leq(self, p: Point, q: Point) -> bool:
        self.require(p)
        self.require(q)
        return p == q or self.closure.has_edge(p, q)

    def lt(self, p: Point, q: Point) -> bool:
        return p != q and self.leq(p, q)

    def spacelike(self, p: Point, q: Point) -> bool:
        return not self.leq(p, q) and not self.leq(q, p)

    def causal_past(self, p: Point) -> FrozenSet[Point]:
        """J⁻(p), including p."""
        if p not in self._pasts:
            self.require(p)
            self._pasts[p] = frozenset(self.closure.predecessors(p)) | {p}
        return self._pasts[p]

    def causal_future(self, p: Point) -> FrozenSet[Point]:
        if p not in self._futures:
            self.require(p)
            self._futures[p] = frozenset(self.closure.successors(p)) | {p}
        return self._futures[p]

    def region_past(self, region: Iterable[Point]) -> FrozenSet[Point]:
        past = frozenset()
        for point in region:
            past |= self.causal_past(point)
        return past

    def joint_past(self, first: Iterable[Point], second: Iterable[Point]) -> FrozenSet[Point]:
        return self.region_past(first) & self.region_past(second)

    def comparable_pairs(self) -> List[Tuple[Point, Point]]:
        """Every (p, q) with p < q."""
        return sorted(self.closure.edges, key=lambda edge: (str(edge[0]), str(edge[1])))

    def is_chain(self, points: Sequence[Point]) -> bool:
        return all(self.lt(p, q) for p, q in zip(points, points[1:]))

    def require_chain(self, points: Sequence[Point]) -> Tuple[Point, ...]:
        points = tuple(points)
        for point in points:
            self.require(point)
        if not self.is_chain(points):
            raise WorldviewError(f"{list(points)} is not a causal chain")
        return points

    def longest_chain(self) -> Tuple[Point, ...]:
        return tuple(nx.dag_longest_path(self.graph)) if self.points else ()

    def as_dict(self) -> Dict[str, Any]:
        reduction = nx.transitive_reduction(self.graph)
        return {
            'points': [str(point) for point in self.points],
            'relations': sorted([str(p), str(q)] for p, q in reduction.edges),
            'chains': [[str(point) for point in chain] for chain in self.chains],
        }
