import logging
import math

import numpy as np
from django.conf import settings
from scipy.interpolate import CubicHermiteSpline

from .integrator import Curve, integrate_geodesic
from .spacetimes import Spacetime
from .vectors import Frame, Plane, TangentVector, require_same_base

logger = logging.getLogger(__name__)

FRAME_TRANSPORT_TOL = 1e-7


def _transport_along_samples(spacetime: Spacetime, along: Curve, vectors: np.ndarray) -> np.ndarray:
    # general curves: RK4 on dV/dλ = −Γ(ẋ, V) over a cubic Hermite interpolant of the samples
    path = CubicHermiteSpline(along.params, along.points, along.tangents, axis=0)
    velocity = path.derivative()
    t0, t1 = float(along.params[0]), float(along.params[-1])
    n_steps = max(1, int(math.ceil((t1 - t0) / along.step - 1e-9)))
    h = (t1 - t0) / n_steps

    def rhs(t, v):
        gamma_u = spacetime.christoffel(path(t)) @ velocity(t)
        return -(v @ gamma_u.T)

    v = np.array(vectors, dtype=float)
    t = t0
    for _ in range(n_steps):
        k1 = rhs(t, v)
        k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2)
        k4 = rhs(t + h, v + h * k3)
        v = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return v


def transport_components(spacetime: Spacetime, vectors: np.ndarray, along: Curve) -> np.ndarray:
    """Parallel-transport the rows of ``vectors`` (based at the curve start) to its end."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if along.is_geodesic:
        trajectory = integrate_geodesic(spacetime, along.start, along.tangents[0], along.length,
                                        along.step, carried=vectors)
        return trajectory.carried
    return _transport_along_samples(spacetime, along, vectors)


def parallel_transport(spacetime: Spacetime, v: TangentVector, along: Curve) -> TangentVector:
    require_same_base(v.base, along.start, 'Transported vector')
    transported = transport_components(spacetime, v.components, along)[0]
    return TangentVector(along.end, transported)


def transport_frame(spacetime: Spacetime, frame: Frame, along: Curve) -> Frame:
    require_same_base(frame.base, along.start, 'Transported frame')
    moved = Frame(along.end, transport_components(spacetime, frame.vectors, along))
    logger.debug(f"Frame transported along a {along.kind}, orthonormality defect "
                 f"{moved.orthonormality_defect(spacetime):.2e}")
    return moved.check(spacetime, FRAME_TRANSPORT_TOL)


def transport_plane(spacetime: Spacetime, plane: Plane, along: Curve) -> Plane:
    require_same_base(plane.base, along.start, 'Transported plane')
    first, second = transport_components(spacetime, plane.basis, along)
    return Plane(along.end, first, second)


def transport_through(spacetime: Spacetime, v: TangentVector, curves) -> TangentVector:
    """Transport along consecutive curves, re-basing at each junction within the closure tolerance."""
    current = v
    for curve in curves:
        require_same_base(current.base, curve.start, 'Vector at a curve junction',
                          tol=settings.GEOMETRY_CLOSURE_TOL)
        current = parallel_transport(spacetime, current.rebased(curve.start), curve)
    return current
