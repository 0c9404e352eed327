import logging
import math
from typing import Optional, Sequence

import numpy as np
from django.conf import settings

from .exceptions import OpenLoop, OrthogonalProjection
from .helper_functions import wrap_angle, wrap_pi
from .integrator import Curve
from .spacetimes import Spacetime
from .transport import transport_through
from .vectors import Frame, Plane, TangentVector, require_same_base

logger = logging.getLogger(__name__)


def plane_angle(spacetime: Spacetime, plane: Plane, u: TangentVector, eps: Optional[float] = None,
                ref_frame: Optional[Frame] = None) -> float:
    """Oriented angle in [0, 2π) from the plane's first vector to the projection of ``u``.

    ``ref_frame`` is the observer frame the plane was read off; it must sit at the plane's base and be
    orthonormal, but the angle itself is always measured from ``plane.first``.
    """
    eps = settings.GEOMETRY_PROJECTION_EPS if eps is None else eps
    require_same_base(u.base, plane.base, 'Vector measured against a plane')
    if ref_frame is not None:
        require_same_base(ref_frame.base, plane.base, 'Reference frame')
        ref_frame.check(spacetime)
    g = spacetime.metric(plane.base)
    along_first = float(plane.first @ g @ u.components)
    along_second = float(plane.second @ g @ u.components)
    projection = math.hypot(along_first, along_second)
    if projection < eps * max(1.0, float(np.linalg.norm(u.components))):
        raise OrthogonalProjection(f"Projection onto the plane has norm {projection:.2e}")
    return wrap_angle(math.atan2(along_second, along_first))


def check_loop_closure(loop: Sequence[Curve], basepoint: np.ndarray, tol: Optional[float] = None) -> float:
    """Largest junction gap of the loop; raises OpenLoop past ``tol``."""
    tol = settings.GEOMETRY_CLOSURE_TOL if tol is None else tol
    if not loop:
        raise OpenLoop("A loop needs at least one curve")
    gaps = [float(np.linalg.norm(loop[0].start - basepoint))]
    gaps += [float(np.linalg.norm(a.end - b.start)) for a, b in zip(loop, loop[1:])]
    gaps.append(float(np.linalg.norm(loop[-1].end - basepoint)))
    worst = max(gaps)
    if worst > tol:
        raise OpenLoop(f"Loop fails to close: largest junction gap {worst:.3e}")
    return worst


def loop_holonomy_angle(spacetime: Spacetime, loop: Sequence[Curve], plane: Plane,
                        u: TangentVector) -> float:
    """Rotation in (−π, π] that transport around ``loop`` applies to ``u``, read in ``plane``."""
    check_loop_closure(loop, plane.base)
    require_same_base(u.base, plane.base, 'Vector carried around the loop')
    returned = transport_through(spacetime, u, loop).rebased(plane.base)
    angle = wrap_pi(plane_angle(spacetime, plane, returned) - plane_angle(spacetime, plane, u))
    logger.debug(f"Loop of {len(loop)} curves rotates a vector by {angle:.3e}")
    return angle


def plane_tilt(spacetime: Spacetime, transported: Plane, reference: Plane) -> float:
    """Largest principal angle between two spacelike 2-planes at the same point."""
    require_same_base(transported.base, reference.base, 'Compared plane')
    g = spacetime.metric(reference.base)
    overlap = transported.basis @ g @ reference.basis.T
    cosines = np.clip(np.linalg.svd(overlap, compute_uv=False), 0.0, 1.0)
    return float(math.acos(cosines.min()))
