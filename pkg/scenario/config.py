import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from django.conf import settings

from geometry.exceptions import GeometryError
from geometry.helper_functions import as_point
from geometry.spacetimes import Spacetime
from geometry.vectors import Frame, adapted_frame

from .exceptions import InvalidExperimentConfig

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    """Where the source sits, when it fires, how the observers move and which directions they may pick."""

    p_O: Tuple[float, ...]
    tau_E: float
    measurement_dirs_A: Tuple[float, ...]
    measurement_dirs_B: Tuple[float, ...]
    observer_speed: float = 0.5
    d_O: Optional[Tuple[float, ...]] = None
    frame_rotation: float = 0.0
    step: Optional[float] = None
    frame: Optional[Frame] = field(default=None, compare=False)

    def __post_init__(self):
        try:
            object.__setattr__(self, 'p_O', tuple(as_point(self.p_O).tolist()))
        except ValueError as e:
            raise InvalidExperimentConfig(f"p_O: {e}")
        if not (self.tau_E > 0.0 and math.isfinite(self.tau_E)):
            raise InvalidExperimentConfig("tau_E must be a positive finite proper time")
        if not 0.0 < self.observer_speed < 1.0:
            raise InvalidExperimentConfig("observer_speed must lie in (0, 1)")
        for label in ('measurement_dirs_A', 'measurement_dirs_B'):
            directions = tuple(float(angle) for angle in getattr(self, label))
            if not directions or not all(math.isfinite(angle) for angle in directions):
                raise InvalidExperimentConfig(f"{label} must be a non-empty list of finite angles")
            object.__setattr__(self, label, directions)
        if self.d_O is not None:
            object.__setattr__(self, 'd_O', tuple(as_point(self.d_O).tolist()))
        if self.step is not None and self.step <= 0.0:
            raise InvalidExperimentConfig("step must be positive")

    @property
    def integration_step(self) -> float:
        return float(self.step or settings.SCENARIO_STEP)

    def frame_O(self, spacetime: Spacetime) -> Frame:
        """The source frame; e_3 is the beam axis d_O."""
        if self.frame is not None:
            return self.frame.check(spacetime)
        if self.d_O is not None:
            g = spacetime.metric(self.p_O)
            d = np.asarray(self.d_O)
            norm = float(d @ g @ d)
            if norm <= 0.0:
                raise InvalidExperimentConfig("d_O must be spacelike")
            if abs(norm - 1.0) > UNIT_TOL:
                raise InvalidExperimentConfig(f"d_O must be a unit vector, g(d_O, d_O) = {norm:.12f}")
        try:
            return adapted_frame(spacetime, self.p_O, axis=self.d_O, rotation=self.frame_rotation)
        except GeometryError as e:
            raise InvalidExperimentConfig(f"Cannot build frame_O: {e}")

    @classmethod
    def from_dict(cls, block: Dict[str, Any]) -> 'ExperimentConfig':
        return cls(
            p_O=tuple(block.get('p_O', (0.0, 0.0, 0.0, 0.0))),
            tau_E=float(block['tau_E']),
            measurement_dirs_A=tuple(block['measurement_dirs_A']),
            measurement_dirs_B=tuple(block['measurement_dirs_B']),
            observer_speed=float(block.get('observer_speed', 0.5)),
            d_O=tuple(block['d_O']) if block.get('d_O') is not None else None,
            frame_rotation=float(block.get('frame_rotation', 0.0)),
            step=block.get('step'),
        )

    def as_dict(self) -> Dict[str, Any]:
        return {
            'p_O': list(self.p_O),
            'tau_E': self.tau_E,
            'measurement_dirs_A': list(self.measurement_dirs_A),
            'measurement_dirs_B': list(self.measurement_dirs_B),
            'observer_speed': self.observer_speed,
            'd_O': list(self.d_O) if self.d_O is not None else None,
            'frame_rotation': self.frame_rotation,
            'step': self.integration_step,
        }
