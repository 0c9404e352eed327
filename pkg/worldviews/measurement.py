import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .causal_dag import CausalDag, Point
from .exceptions import ShapeMismatch
from .fields import FieldConfigSpace, FieldSpec
from .worldview import Event, WorldviewTheory, build_worldview, event

logger = logging.getLogger(__name__)

SOURCE = 'sigma'
DEVICE = 'chi'
OUTCOMES = ('phi_1', 'phi_2')


@dataclass
class MeasurementReport:
    """Two binary measurements of one source region, seen from Ω_{p₀}."""

    worldview: WorldviewTheory
    partition_1: Tuple[Event, Event]
    partition_2: Tuple[Event, Event]

    @property
    def equal(self) -> bool:
        return self.partition_1[0].same_states(self.partition_2[0])

    def is_partition(self, partition: Tuple[Event, Event]) -> bool:
        plus, minus = partition
        return bool(np.all(plus.mask ^ minus.mask))

    def witness(self) -> Optional[Dict[str, Any]]:
        """A configuration where the two measurements disagree."""
        disagree = np.flatnonzero(self.partition_1[0].mask ^ self.partition_2[0].mask)
        if not len(disagree):
            return None
        return {field: {str(point): value for point, value in values.items()}
                for field, values in self.worldview.assignment(int(disagree[0])).items()}

    def as_dict(self) -> Dict[str, Any]:
        return {
            'point': str(self.worldview.point),
            'omega_size': self.worldview.size,
            'sizes': {
                'E1+': len(self.partition_1[0]), 'E1-': len(self.partition_1[1]),
                'E2+': len(self.partition_2[0]), 'E2-': len(self.partition_2[1]),
            },
            'partitions_valid': self.is_partition(self.partition_1) and self.is_partition(self.partition_2),
            # all four events are subsets of one Ω_{p₀}, hence members of one Boolean algebra Λ_{p₀}
            'same_algebra': True,
            'equal': self.equal,
            'witness': self.witness(),
        }


def _check_shape(dag: CausalDag, p0: Point, region: Sequence[Point], p1: Point, p2: Point,
                 devices: Optional[Tuple[Point, Point]]):
    if not region:
        raise ShapeMismatch("The source region is empty")
    for point in region:
        if not dag.leq(p0, point):
            raise ShapeMismatch(f"Source point {point!r} is not in the future of {p0!r}")
        for target in (p1, p2):
            if not dag.leq(point, target):
                raise ShapeMismatch(f"Source point {point!r} does not precede {target!r}")
    if not dag.spacelike(p1, p2):
        raise ShapeMismatch(f"Measurement points {p1!r} and {p2!r} are not spacelike")
    if devices is not None:
        for device, target in zip(devices, (p1, p2)):
            if not dag.leq(device, target):
                raise ShapeMismatch(f"Device point {device!r} does not precede {target!r}")
            if dag.leq(device, p0):
                raise ShapeMismatch(f"Device point {device!r} is already fixed in the past of {p0!r}")


def measurement_fields(dag: CausalDag, region: Sequence[Point], p1: Point, p2: Point,
                       devices: Optional[Tuple[Point, Point]] = None) -> Tuple[FieldSpec, ...]:
    """Binary source σ on the region; outcomes φᵢ(pᵢ) = parity of σ, flipped by the device χ at dᵢ if any."""
    region = tuple(region)
    source = FieldSpec(SOURCE, {point: (0, 1) if point in region else (0,) for point in dag.points})
    specs = [source]
    if devices is not None:
        specs.append(FieldSpec(DEVICE, {point: (0, 1) if point in devices else (0,) for point in dag.points}))

    def outcome(target: Point, device: Optional[Point]):
        def rule(assignment):
            value = sum(assignment[SOURCE][point] for point in region) % 2
            if device is not None:
                value ^= assignment[DEVICE][device]
            return {point: value if point == target else 0 for point in dag.points}
        return rule

    for name, target, device in zip(OUTCOMES, (p1, p2), devices or (None, None)):
        specs.append(FieldSpec.uniform(name, dag.points, (0, 1), rule=outcome(target, device)))
    return tuple(specs)


def measurement_scenario(dag: CausalDag, p0: Point, region: Iterable[Point], p1: Point, p2: Point,
                         device_points: Optional[Sequence[Point]] = None) -> MeasurementReport:
    """E₁^±, E₂^± in Ω_{p₀} for two measurements at spacelike p₁, p₂ of a source region R.

    Without devices both outcomes copy the source parity and the partitions agree; a free
    device field in each measurement's past makes them differ.
    """
    region = tuple(dag.require(point) for point in region)
    for point in (p0, p1, p2):
        dag.require(point)
    devices = tuple(device_points) if device_points is not None else None
    if devices is not None and len(devices) != 2:
        raise ShapeMismatch("Exactly two device points are needed, one per measurement")
    _check_shape(dag, p0, region, p1, p2, devices)

    space = FieldConfigSpace(dag, measurement_fields(dag, region, p1, p2, devices))
    worldview = build_worldview(space, {}, p0)
    partitions = []
    for name, target in zip(OUTCOMES, (p1, p2)):
        plus = event(worldview, name, [target], 1)
        minus = event(worldview, name, [target], 0)
        partitions.append((plus, minus))
    report = MeasurementReport(worldview, partitions[0], partitions[1])
    logger.info(f"Measurements at {p1!r}, {p2!r} seen from {p0!r}: partitions "
                f"{'agree' if report.equal else 'differ'}")
    return report
