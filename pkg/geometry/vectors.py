import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from django.conf import settings

from .exceptions import BaseMismatch, GeometryError, NotOrthonormal
from .helper_functions import as_point
from .spacetimes import ETA, Spacetime

logger = logging.getLogger(__name__)

CLASSIFY_TOL = 1e-9
FRAME_TOL = 1e-8


def classify_components(spacetime: Spacetime, base: np.ndarray, components: np.ndarray,
                        tol: float = CLASSIFY_TOL) -> str:
    """'timelike', 'null' or 'spacelike', judged on g(v,v) relative to the coordinate size of v."""
    norm2 = spacetime.inner(base, components, components)
    scale = max(1.0, float(components @ components))
    if abs(norm2) <= tol * scale:
        return 'null'
    return 'timelike' if norm2 < 0.0 else 'spacelike'


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'base', as_point(self.base))
        object.__setattr__(self, 'components', as_point(self.components))

    def norm2(self, spacetime: Spacetime) -> float:
        return spacetime.inner(self.base, self.components, self.components)

    def classify(self, spacetime: Spacetime, tol: float = CLASSIFY_TOL) -> str:
        return classify_components(spacetime, self.base, self.components, tol)

    def rebased(self, base) -> 'TangentVector':
        return TangentVector(base, self.components)

    def __neg__(self) -> 'TangentVector':
        return TangentVector(self.base, -self.components)


def require_same_base(base: np.ndarray, other: np.ndarray, what: str, tol: Optional[float] = None) -> None:
    tol = settings.GEOMETRY_CLOSURE_TOL if tol is None else tol
    gap = float(np.linalg.norm(np.asarray(base) - np.asarray(other)))
    if gap > tol:
        raise BaseMismatch(f"{what} is based {gap:.3e} away from the expected point")


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis e_0..e_3 at a point, e_0 timelike. Rows of ``vectors`` are the e_a."""

    base: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'base', as_point(self.base))
        vectors = np.asarray(self.vectors, dtype=float)
        if vectors.shape != (4, 4):
            raise ValueError(f"A frame needs four 4-vectors, got shape {vectors.shape}")
        object.__setattr__(self, 'vectors', vectors)

    def e(self, index: int) -> TangentVector:
        return TangentVector(self.base, self.vectors[index])

    def orthonormality_defect(self, spacetime: Spacetime) -> float:
        gram = self.vectors @ spacetime.metric(self.base) @ self.vectors.T
        return float(np.max(np.abs(gram - ETA)))

    def check(self, spacetime: Spacetime, tol: float = FRAME_TOL) -> 'Frame':
        defect = self.orthonormality_defect(spacetime)
        if defect > tol:
            raise NotOrthonormal(f"Frame orthonormality defect {defect:.3e} exceeds {tol:.1e}")
        return self

    def spatial_plane(self) -> 'Plane':
        """The (e_1, e_2) plane, orthogonal to e_0 and e_3."""
        return Plane(self.base, self.vectors[1], self.vectors[2])

    def components_in(self, spacetime: Spacetime, v: np.ndarray) -> np.ndarray:
        """Frame components v^(a) of a coordinate vector."""
        lowered = self.vectors @ spacetime.metric(self.base) @ np.asarray(v, dtype=float)
        return ETA.diagonal() * lowered


@dataclass(frozen=True, eq=False)
class Plane:
    """A spacelike 2-plane given by an ordered orthonormal pair; the order fixes orientation."""

    base: np.ndarray
    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'base', as_point(self.base))
        object.__setattr__(self, 'first', as_point(self.first))
        object.__setattr__(self, 'second', as_point(self.second))

    @property
    def basis(self) -> np.ndarray:
        return np.vstack([self.first, self.second])

    def direction(self, angle: float) -> TangentVector:
        """Unit vector at the given angle from ``first`` towards ``second``."""
        return TangentVector(self.base, math.cos(angle) * self.first + math.sin(angle) * self.second)


def _gram_schmidt(spacetime: Spacetime, base: np.ndarray, candidates: Sequence[np.ndarray]) -> list:
    g = spacetime.checked_metric(base)
    basis = []
    for candidate in candidates:
        w = np.array(candidate, dtype=float)
        for e in basis:
            w = w - (e @ g @ w) / (e @ g @ e) * e
        norm2 = float(w @ g @ w)
        if abs(norm2) < 1e-10:
            continue
        basis.append(w / math.sqrt(abs(norm2)))
        if len(basis) == 4:
            break
    return basis


def adapted_frame(spacetime: Spacetime, point, axis: Optional[Sequence[float]] = None,
                  rotation: float = 0.0) -> Frame:
    """
    Orthonormal frame at ``point`` built from the coordinate basis.

    e_0 follows ∂_t; e_3 follows ``axis`` when given (otherwise ∂_3); (e_1, e_2)
    are then rotated rigidly about e_3 by ``rotation``.
    """
    base = as_point(point)
    coordinate = np.eye(4)
    if axis is None:
        candidates = [coordinate[0], coordinate[1], coordinate[2], coordinate[3]]
    else:
        candidates = [coordinate[0], np.asarray(axis, dtype=float), coordinate[1], coordinate[2], coordinate[3]]
    basis = _gram_schmidt(spacetime, base, candidates)
    if len(basis) < 4:
        raise GeometryError("Could not complete an orthonormal frame from the coordinate basis")
    g = spacetime.metric(base)
    if basis[0] @ g @ basis[0] >= 0.0:
        raise GeometryError("The coordinate time direction is not timelike here")

    if axis is None:
        e0, e1, e2, e3 = basis
    else:
        e0, e3, e1, e2 = basis
        if np.linalg.det(np.vstack([e0, e1, e2, e3])) < 0.0:
            e2 = -e2

    c, s = math.cos(rotation), math.sin(rotation)
    e1, e2 = c * e1 + s * e2, -s * e1 + c * e2
    frame = Frame(base, np.vstack([e0, e1, e2, e3]))
    return frame.check(spacetime)
