"""Plain-text causal DAGs.

    # comment
    p q                         p precedes q
    point r                     isolated point(s)
    alphabet spin * 0 1         values of a field at every point (or one named point)
    true spin p 1               true value of a field at a point (or '*')
    chain p q                   an observer worldline
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from .causal_dag import CausalDag, Point
from .exceptions import DagFormatError
from .fields import FieldConfigSpace, FieldSpec, observer_indicator

logger = logging.getLogger(__name__)

WILDCARD = '*'
DEFAULT_ALPHABET = (0,)


def parse_value(token: str) -> Any:
    try:
        return int(token)
    except ValueError:
        return token


@dataclass
class DagDocument:
    dag: CausalDag
    space: FieldConfigSpace
    true_config: Dict[str, Dict[Point, Any]]
    chains: Tuple[Tuple[Point, ...], ...] = field(default_factory=tuple)

    @property
    def field_names(self) -> List[str]:
        return [name for name, spec in self.space.fields.items() if not spec.derived]


def parse_dag(text: str) -> DagDocument:
    relations: List[Tuple[str, str]] = []
    points: List[str] = []
    chains: List[Tuple[str, ...]] = []
    alphabets: Dict[str, List[Tuple[str, Tuple[Any, ...], int]]] = {}
    truths: Dict[str, List[Tuple[str, Any, int]]] = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if not tokens:
            continue
        keyword, args = tokens[0], tokens[1:]
        if keyword == 'point':
            if not args:
                raise DagFormatError("'point' needs at least one name", number)
            points.extend(args)
        elif keyword == 'chain':
            if not args:
                raise DagFormatError("'chain' needs at least one point", number)
            chains.append(tuple(args))
        elif keyword == 'alphabet':
            if len(args) < 3:
                raise DagFormatError("'alphabet' needs a field, a point and at least one value", number)
            alphabets.setdefault(args[0], []).append((args[1], tuple(parse_value(v) for v in args[2:]), number))
        elif keyword == 'true':
            if len(args) != 3:
                raise DagFormatError("'true' needs a field, a point and one value", number)
            truths.setdefault(args[0], []).append((args[1], parse_value(args[2]), number))
        elif len(tokens) == 2:
            relations.append((tokens[0], tokens[1]))
        else:
            raise DagFormatError(f"Cannot read '{raw.strip()}'", number)

    for name in truths:
        if name not in alphabets:
            raise DagFormatError(f"True value for undeclared field '{name}'", truths[name][0][2])

    dag = CausalDag(relations, points=points, chains=chains)

    def resolve(target: str, number: int) -> List[Point]:
        if target == WILDCARD:
            return list(dag.points)
        if target not in dag:
            raise DagFormatError(f"Unknown point '{target}'", number)
        return [target]

    specs = []
    true_config: Dict[str, Dict[Point, Any]] = {}
    for name, declarations in alphabets.items():
        table = {point: DEFAULT_ALPHABET for point in dag.points}
        for target, values, number in declarations:
            for point in resolve(target, number):
                table[point] = values
        specs.append(FieldSpec(name, table))
        true_config[name] = {}
        for target, value, number in truths.get(name, ()):
            for point in resolve(target, number):
                if value not in table[point]:
                    raise DagFormatError(f"{value!r} is not in the alphabet of '{name}' at '{point}'", number)
                true_config[name][point] = value

    for index, chain in enumerate(dag.chains, start=1):
        specs.append(observer_indicator(dag, chain, name=f"gamma_O{index}"))
    space = FieldConfigSpace(dag, specs)
    logger.debug(f"Parsed DAG with {len(dag)} points, {len(alphabets)} fields and {len(dag.chains)} chains")
    return DagDocument(dag, space, true_config, dag.chains)


def load_dag(path: Union[str, Path]) -> DagDocument:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DagFormatError(f"Cannot read DAG file {path}: {e}")
    return parse_dag(text)
