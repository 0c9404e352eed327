import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from django.conf import settings

from .exceptions import (
    BaseMismatch,
    ChartEscape,
    IntegrationDiverged,
    NoConvergence,
    WrongCausalType,
)
from .helper_functions import as_point
from .spacetimes import Spacetime
from .vectors import TangentVector, classify_components

logger = logging.getLogger(__name__)

GEODESIC_KINDS = ('timelike-geodesic', 'null-geodesic', 'spacelike-geodesic')
CURVE_KINDS = GEODESIC_KINDS + ('general',)
NORM_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class Trajectory:
    params: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    carried: Optional[np.ndarray]


def _rhs(spacetime: Spacetime, x: np.ndarray, u: np.ndarray, carried: Optional[np.ndarray]):
    # gamma_u[m, b] = Γ^m_ab u^a
    gamma_u = spacetime.christoffel(x) @ u
    du = -(gamma_u @ u)
    dv = None if carried is None else -(carried @ gamma_u.T)
    return u, du, dv


def integrate_geodesic(spacetime: Spacetime, x0: np.ndarray, u0: np.ndarray, length: float,
                       step: float, carried: Optional[np.ndarray] = None) -> Trajectory:
    """
    Classical RK4 on the geodesic equation, optionally transporting ``carried`` vectors.

    The step is shortened so that a whole number of steps covers ``length`` exactly.
    """
    if step <= 0.0 or length <= 0.0:
        raise ValueError("step and length must be positive")
    n_steps = max(1, int(math.ceil(length / step - 1e-9)))
    h = length / n_steps

    x = np.array(x0, dtype=float)
    u = np.array(u0, dtype=float)
    v = None if carried is None else np.array(carried, dtype=float).reshape(-1, 4)
    points = np.empty((n_steps + 1, 4))
    tangents = np.empty((n_steps + 1, 4))
    points[0], tangents[0] = x, u

    for i in range(1, n_steps + 1):
        k1x, k1u, k1v = _rhs(spacetime, x, u, v)
        k2x, k2u, k2v = _rhs(spacetime, x + 0.5 * h * k1x, u + 0.5 * h * k1u,
                             None if v is None else v + 0.5 * h * k1v)
        k3x, k3u, k3v = _rhs(spacetime, x + 0.5 * h * k2x, u + 0.5 * h * k2u,
                             None if v is None else v + 0.5 * h * k2v)
        k4x, k4u, k4v = _rhs(spacetime, x + h * k3x, u + h * k3u,
                             None if v is None else v + h * k3v)
        x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        if v is not None:
            v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise IntegrationDiverged(f"Geodesic integration produced non-finite values at step {i}")
        if not spacetime.in_chart(x):
            raise ChartEscape(f"Geodesic left the {spacetime.builtin_id} chart at parameter {i * h:.4f}, "
                              f"point {list(np.round(x, 6))}")
        points[i], tangents[i] = x, u

    params = np.linspace(0.0, length, n_steps + 1)
    return Trajectory(params, points, tangents, v)


@dataclass(frozen=True, eq=False)
class Curve:
    """
    A sampled curve. Geodesic kinds are regenerated from (start, initial tangent,
    length, step) whenever something is transported along them.
    """

    kind: str
    params: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    step: float

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"Unknown curve kind '{self.kind}'")

    @property
    def is_geodesic(self) -> bool:
        return self.kind in GEODESIC_KINDS

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def initial_tangent(self) -> TangentVector:
        return TangentVector(self.points[0], self.tangents[0])

    @property
    def final_tangent(self) -> TangentVector:
        return TangentVector(self.points[-1], self.tangents[-1])

    @property
    def length(self) -> float:
        return float(self.params[-1] - self.params[0])

    def samples(self):
        for param, point, tangent in zip(self.params, self.points, self.tangents):
            yield float(param), point, TangentVector(point, tangent)

    def reversed(self, spacetime: Spacetime) -> 'Curve':
        """The same path traversed backwards."""
        if self.is_geodesic:
            return _shoot(spacetime, self.end, -self.tangents[-1], self.length, self.step)
        params = self.params[-1] - self.params[::-1]
        return Curve('general', params, self.points[::-1].copy(), -self.tangents[::-1], self.step)

    def norm_drift(self, spacetime: Spacetime) -> float:
        """Largest relative change of g(ẋ,ẋ) along the samples."""
        norms = np.array([spacetime.inner(x, u, u) for x, u in zip(self.points, self.tangents)])
        scale = max(abs(norms[0]), float(self.tangents[0] @ self.tangents[0]) * 1e-12, 1e-300)
        return float(np.max(np.abs(norms - norms[0])) / scale)

    def null_residual(self, spacetime: Spacetime) -> float:
        return float(max(abs(spacetime.inner(x, u, u)) for x, u in zip(self.points, self.tangents)))

    def geodesic_residual(self, spacetime: Spacetime) -> float:
        """max |ẍ + Γ(ẋ,ẋ)| at interior samples, ẍ from centred differences of the tangents."""
        if len(self.params) < 3:
            return 0.0
        h = self.params[2:] - self.params[:-2]
        acceleration = (self.tangents[2:] - self.tangents[:-2]) / h[:, None]
        residual = 0.0
        for i in range(1, len(self.params) - 1):
            x, u = self.points[i], self.tangents[i]
            value = acceleration[i - 1] + (spacetime.christoffel(x) @ u) @ u
            residual = max(residual, float(np.max(np.abs(value))))
        return residual

    def proper_length(self, spacetime: Spacetime) -> float:
        """Proper time or proper distance; valid for geodesics, whose tangent norm is constant."""
        return math.sqrt(abs(spacetime.inner(self.start, self.tangents[0], self.tangents[0]))) * self.length


def _kind_for(spacetime: Spacetime, x: np.ndarray, u: np.ndarray) -> str:
    return f"{classify_components(spacetime, x, u, settings.GEOMETRY_NULL_TOL)}-geodesic"


def _shoot(spacetime: Spacetime, start: np.ndarray, u0: np.ndarray, length: float,
           step: Optional[float] = None) -> Curve:
    step = float(step or settings.GEOMETRY_STEP)
    trajectory = integrate_geodesic(spacetime, start, u0, length, step)
    return Curve(_kind_for(spacetime, trajectory.points[0], trajectory.tangents[0]),
                 trajectory.params, trajectory.points, trajectory.tangents, step)


def shoot_geodesic(spacetime: Spacetime, start, v0: TangentVector, length: float,
                   step: Optional[float] = None) -> Curve:
    """Integrate the geodesic with initial tangent ``v0`` for affine length ``length``."""
    start = as_point(start)
    if float(np.linalg.norm(v0.base - start)) > settings.GEOMETRY_CLOSURE_TOL:
        raise BaseMismatch("Initial tangent is not based at the start point")
    spacetime.checked_metric(start)
    spacetime.require_in_chart(start, 'start point')
    curve = _shoot(spacetime, start, v0.components, length, step)
    drift = curve.norm_drift(spacetime)
    if curve.kind != 'null-geodesic' and drift > NORM_DRIFT_TOL:
        logger.warning(f"Tangent norm drifted by {drift:.2e} (relative) along a {curve.kind}")
    return curve


def _shooting_jacobian(spacetime: Spacetime, start: np.ndarray, u: np.ndarray, end: np.ndarray,
                       step: float) -> np.ndarray:
    jacobian = np.empty((4, 4))
    eps = 1e-7 * max(1.0, float(np.linalg.norm(u)))
    for i in range(4):
        bumped = u.copy()
        bumped[i] += eps
        jacobian[:, i] = (_shoot(spacetime, start, bumped, 1.0, step).end - end) / eps
    return jacobian


_KIND_ALIASES = {
    'timelike': 'timelike-geodesic',
    'null': 'null-geodesic',
    'spacelike': 'spacelike-geodesic',
}


def connect_geodesic(spacetime: Spacetime, start, end, kind: Optional[str] = None,
                     step: Optional[float] = None, max_iter: Optional[int] = None,
                     tol: Optional[float] = None) -> Curve:
    """
    Geodesic from ``start`` to ``end`` with affine length 1, found by damped Newton
    shooting on the initial tangent from the straight-line guess ``end - start``.
    """
    start, end = as_point(start), as_point(end)
    step = float(step or settings.GEOMETRY_STEP)
    max_iter = int(max_iter or settings.GEOMETRY_NEWTON_MAX_ITER)
    tol = float(tol or settings.GEOMETRY_NEWTON_TOL)
    wanted = _KIND_ALIASES.get(kind, kind) if kind else None
    spacetime.require_in_chart(start, 'start point')
    spacetime.require_in_chart(end, 'end point')

    u = end - start
    curve = _shoot(spacetime, start, u, 1.0, step)
    miss = float(np.linalg.norm(curve.end - end))
    iterations = 0
    while miss >= tol:
        if iterations >= max_iter:
            raise NoConvergence(f"Geodesic shooting stalled at miss {miss:.3e} after {iterations} iterations")
        iterations += 1
        jacobian = _shooting_jacobian(spacetime, start, u, curve.end, step)
        delta = np.linalg.lstsq(jacobian, end - curve.end, rcond=None)[0]

        damping = 1.0
        while True:
            trial_u = u + damping * delta
            try:
                trial = _shoot(spacetime, start, trial_u, 1.0, step)
                trial_miss = float(np.linalg.norm(trial.end - end))
            except IntegrationDiverged:
                trial, trial_miss = None, math.inf
            if trial_miss < miss:
                u, curve, miss = trial_u, trial, trial_miss
                break
            damping *= 0.5
            if damping < 1.0 / 1024.0:
                raise NoConvergence(f"Damped Newton step failed to reduce miss {miss:.3e}")
        logger.debug(f"connect_geodesic iteration {iterations}: miss {miss:.3e} (damping {damping})")

    if wanted and curve.kind != wanted:
        raise WrongCausalType(f"Connecting geodesic is {curve.kind}, expected {wanted}")
    return curve


def interval(spacetime: Spacetime, p, q, step: Optional[float] = None) -> Tuple[float, Curve]:
    """g(u,u) at p for the affine-length-1 geodesic p → q, with that geodesic."""
    curve = connect_geodesic(spacetime, p, q, step=step)
    u = curve.tangents[0]
    return spacetime.inner(curve.start, u, u), curve


def sub_geodesic(spacetime: Spacetime, curve: Curve, fraction: float) -> Curve:
    """Sub-geodesic from the start of ``curve`` to the given fraction of its affine length."""
    if not curve.is_geodesic:
        raise ValueError("Sub-curves are only regenerated for geodesics")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    return _shoot(spacetime, curve.start, curve.tangents[0], fraction * curve.length, curve.step)
