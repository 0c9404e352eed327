import math
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle into [0, 2π)."""
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod can hand back 2π itself after the shift
    return 0.0 if wrapped >= TWO_PI else wrapped


def wrap_pi(angle: float) -> float:
    """Wrap an angle into (−π, π]."""
    wrapped = wrap_angle(angle)
    return wrapped - TWO_PI if wrapped > math.pi else wrapped


def as_point(coords: Sequence[float]) -> np.ndarray:
    point = np.asarray(coords, dtype=float).reshape(-1)
    if point.shape != (4,):
        raise ValueError(f"Expected a coordinate 4-tuple, got shape {point.shape}")
    return point
