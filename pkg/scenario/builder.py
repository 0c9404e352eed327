import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np
from django.conf import settings
from scipy.optimize import brentq

from geometry.exceptions import NoConvergence, WrongCausalType
from geometry.integrator import Curve, connect_geodesic, interval, shoot_geodesic, sub_geodesic
from geometry.spacetimes import Spacetime
from geometry.transport import transport_frame, transport_plane
from geometry.vectors import Frame, Plane, TangentVector

from .config import ExperimentConfig
from .exceptions import NoInterception

logger = logging.getLogger(__name__)

CROSSING_SCAN_POINTS = 8
INVARIANT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Arm:
    """One observer's half of the experiment; χ is p_α for A and p_β for B."""

    label: str
    sign: int
    ray_parameter: float
    p_X: np.ndarray
    p_chi: np.ndarray
    chi_fraction: float
    gamma_EX: Curve
    gamma_OX: Curve
    gamma_chiE: Curve
    gamma_Ochi: Curve
    gamma_chiX: Curve
    # reversed copies used when closing holonomy loops
    gamma_XO: Curve
    gamma_Echi: Curve
    gamma_chiO: Curve
    gamma_Xchi: Curve
    m_X: Plane
    m_bar_X: Plane
    m_chi: Plane
    launch_misalignment: float

    def summary(self) -> Dict[str, Any]:
        return {
            'ray_parameter': self.ray_parameter,
            'chi_fraction': self.chi_fraction,
            'launch_misalignment': self.launch_misalignment,
        }


@dataclass(frozen=True, eq=False)
class ExperimentGeometry:
    config: ExperimentConfig
    spacetime_info: Dict[str, Any]
    frame_O: Frame
    frame_E: Frame
    gamma_OE: Curve
    gamma_EO: Curve
    arm_A: Arm
    arm_B: Arm
    v_E: TangentVector
    residuals: Dict[str, float]

    p_O = property(lambda self: self.gamma_OE.start)
    p_E = property(lambda self: self.gamma_OE.end)
    p_A = property(lambda self: self.arm_A.p_X)
    p_B = property(lambda self: self.arm_B.p_X)
    p_alpha = property(lambda self: self.arm_A.p_chi)
    p_beta = property(lambda self: self.arm_B.p_chi)
    m_O = property(lambda self: self.frame_O.spatial_plane())
    m_E = property(lambda self: self.frame_E.spatial_plane())

    def arm(self, label: str) -> Arm:
        return self.arm_A if label == 'A' else self.arm_B

    def invariant_failures(self, tol: float = INVARIANT_TOL) -> List[str]:
        return [name for name, value in self.residuals.items() if value > tol]

    def as_dict(self) -> Dict[str, Any]:
        def curve_summary(curve: Curve) -> Dict[str, Any]:
            return {
                'kind': curve.kind,
                'start': curve.start.tolist(),
                'end': curve.end.tolist(),
                'affine_length': curve.length,
                'samples': len(curve.params),
            }

        def plane_summary(plane: Plane) -> Dict[str, Any]:
            return {'base': plane.base.tolist(), 'first': plane.first.tolist(), 'second': plane.second.tolist()}

        return {
            'spacetime': self.spacetime_info,
            'config': self.config.as_dict(),
            'points': {
                'p_O': self.p_O.tolist(), 'p_E': self.p_E.tolist(),
                'p_A': self.p_A.tolist(), 'p_B': self.p_B.tolist(),
                'p_alpha': self.p_alpha.tolist(), 'p_beta': self.p_beta.tolist(),
            },
            'curves': {
                'gamma_OE': curve_summary(self.gamma_OE),
                'gamma_OA': curve_summary(self.arm_A.gamma_OX),
                'gamma_OB': curve_summary(self.arm_B.gamma_OX),
                'gamma_EA': curve_summary(self.arm_A.gamma_EX),
                'gamma_EB': curve_summary(self.arm_B.gamma_EX),
                'gamma_alphaE': curve_summary(self.arm_A.gamma_chiE),
                'gamma_betaE': curve_summary(self.arm_B.gamma_chiE),
            },
            'planes': {
                'm_O': plane_summary(self.m_O), 'm_E': plane_summary(self.m_E),
                'm_A': plane_summary(self.arm_A.m_X), 'm_B': plane_summary(self.arm_B.m_X),
                'm_bar_A': plane_summary(self.arm_A.m_bar_X), 'm_bar_B': plane_summary(self.arm_B.m_bar_X),
            },
            'v_E': self.v_E.components.tolist(),
            'arms': {'A': self.arm_A.summary(), 'B': self.arm_B.summary()},
            'residuals': self.residuals,
        }


def emission_polarization(frame_E: Frame, theta_v: float) -> TangentVector:
    """v_E: e_E1 rotated by θ_v inside m_E, so it is orthogonal to both e_E0 and the beam axis."""
    return frame_E.spatial_plane().direction(theta_v)


def _frame_speed(spacetime: Spacetime, frame_O: Frame, u: np.ndarray) -> float:
    components = frame_O.components_in(spacetime, u)
    return float(np.linalg.norm(components[1:]) / components[0])


def _intercept(spacetime: Spacetime, config: ExperimentConfig, frame_O: Frame, p_E: np.ndarray,
               k: np.ndarray, step: float) -> float:
    """Ray parameter at which the observer, leaving p_O at ``observer_speed``, meets the light ray."""
    speed = config.observer_speed
    ray_start = TangentVector(p_E, k)

    def mismatch(lam: float) -> float:
        q = shoot_geodesic(spacetime, p_E, ray_start, lam, step).end
        try:
            u = connect_geodesic(spacetime, config.p_O, q, 'timelike', step).tangents[0]
        except (NoConvergence, WrongCausalType) as e:
            raise NoInterception(f"Observer path correction failed at ray parameter {lam:.4f}: {e}")
        return _frame_speed(spacetime, frame_O, u) - speed

    # flat-space interception point as the bracket centre
    guess = speed * config.tau_E / (1.0 - speed)
    lower, upper = 0.5 * guess, 2.0 * guess
    f_lower, f_upper = mismatch(lower), mismatch(upper)
    for _ in range(4):
        if f_lower < 0.0 < f_upper:
            break
        if f_lower >= 0.0:
            lower *= 0.25
            f_lower = mismatch(lower)
        if f_upper <= 0.0:
            upper *= 2.0
            f_upper = mismatch(upper)
    else:
        if not f_lower < 0.0 < f_upper:
            raise NoInterception(f"Could not bracket the interception (speeds {f_lower + speed:.4f}, {f_upper + speed:.4f})")

    try:
        return brentq(mismatch, lower, upper, xtol=1e-12, rtol=1e-12,
                      maxiter=settings.SCENARIO_INTERCEPT_MAX_ITER)
    except RuntimeError as e:
        raise NoInterception(f"Interception search did not converge: {e}")


def _light_cone_crossing(spacetime: Spacetime, gamma_OX: Curve, p_E: np.ndarray, step: float) -> float:
    """Earliest affine fraction along γ_OX where the point becomes null-separated from p_E."""

    def sigma(fraction: float) -> float:
        point = gamma_OX.start if fraction <= 0.0 else sub_geodesic(spacetime, gamma_OX, fraction).end
        return interval(spacetime, point, p_E, step)[0]

    previous_fraction, previous_sigma = 0.0, sigma(0.0)
    if previous_sigma >= 0.0:
        raise NoInterception("p_E is not in the timelike future of p_O")
    for k in range(1, CROSSING_SCAN_POINTS + 1):
        fraction = k / CROSSING_SCAN_POINTS
        value = sigma(fraction)
        if value >= 0.0:
            if value == 0.0:
                return fraction
            return brentq(sigma, previous_fraction, fraction, xtol=1e-13, rtol=1e-13, maxiter=100)
        previous_fraction, previous_sigma = fraction, value
    raise NoInterception("Observer worldline never crosses the past light cone of p_E")


def _build_arm(spacetime: Spacetime, config: ExperimentConfig, frame_O: Frame, frame_E: Frame,
               label: str, sign: int, step: float) -> Arm:
    p_E = frame_E.base
    k = frame_E.vectors[0] + sign * frame_E.vectors[3]
    ray_parameter = _intercept(spacetime, config, frame_O, p_E, k, step)
    gamma_EX = shoot_geodesic(spacetime, p_E, TangentVector(p_E, k), ray_parameter, step)
    p_X = gamma_EX.end
    gamma_OX = connect_geodesic(spacetime, config.p_O, p_X, 'timelike', step)

    launch = frame_O.components_in(spacetime, gamma_OX.tangents[0])[1:]
    misalignment = math.acos(float(np.clip(sign * launch[2] / np.linalg.norm(launch), -1.0, 1.0)))

    fraction = _light_cone_crossing(spacetime, gamma_OX, p_E, step)
    gamma_Ochi = sub_geodesic(spacetime, gamma_OX, fraction)
    p_chi = gamma_Ochi.end
    gamma_chiX = shoot_geodesic(spacetime, p_chi, gamma_Ochi.final_tangent,
                                (1.0 - fraction) * gamma_OX.length, step)
    gamma_chiE = connect_geodesic(spacetime, p_chi, p_E, 'null', step)

    m_O = frame_O.spatial_plane()
    logger.debug(f"Arm {label}: ray parameter {ray_parameter:.6f}, light-cone crossing at fraction {fraction:.6f}")
    return Arm(
        label=label,
        sign=sign,
        ray_parameter=ray_parameter,
        p_X=p_X,
        p_chi=p_chi,
        chi_fraction=fraction,
        gamma_EX=gamma_EX,
        gamma_OX=gamma_OX,
        gamma_chiE=gamma_chiE,
        gamma_Ochi=gamma_Ochi,
        gamma_chiX=gamma_chiX,
        gamma_XO=gamma_OX.reversed(spacetime),
        gamma_Echi=gamma_chiE.reversed(spacetime),
        gamma_chiO=gamma_Ochi.reversed(spacetime),
        gamma_Xchi=gamma_chiX.reversed(spacetime),
        m_X=transport_plane(spacetime, m_O, gamma_OX),
        m_bar_X=transport_plane(spacetime, frame_E.spatial_plane(), gamma_EX),
        m_chi=transport_plane(spacetime, m_O, gamma_Ochi),
        launch_misalignment=misalignment,
    )


def _residuals(spacetime: Spacetime, frame_E: Frame, v_E: TangentVector, arms: List[Arm]) -> Dict[str, float]:
    g_E = spacetime.metric(frame_E.base)
    residuals = {
        'frame_E_orthonormality': frame_E.orthonormality_defect(spacetime),
        'v_E_time_component': abs(float(v_E.components @ g_E @ frame_E.vectors[0])),
        'v_E_beam_component': abs(float(v_E.components @ g_E @ frame_E.vectors[3])),
    }
    for arm in arms:
        greek = 'alpha' if arm.label == 'A' else 'beta'
        residuals[f'gamma_E{arm.label}_null'] = arm.gamma_EX.null_residual(spacetime)
        residuals[f'p_{greek}_null_separation'] = abs(spacetime.inner(
            arm.p_chi, arm.gamma_chiE.tangents[0], arm.gamma_chiE.tangents[0]))
        residuals[f'p_{greek}_on_gamma_O{arm.label}'] = float(np.linalg.norm(arm.gamma_chiX.end - arm.p_X))
    return residuals


def build_geometry(spacetime: Spacetime, config: ExperimentConfig) -> ExperimentGeometry:
    step = config.integration_step
    frame_O = config.frame_O(spacetime)
    gamma_OE = shoot_geodesic(spacetime, frame_O.base, frame_O.e(0), config.tau_E, step)
    frame_E = transport_frame(spacetime, frame_O, gamma_OE)
    arms = [_build_arm(spacetime, config, frame_O, frame_E, label, sign, step)
            for label, sign in (('A', 1), ('B', -1))]
    v_E = emission_polarization(frame_E, 0.0)

    causal = {
        'gamma_OE': gamma_OE.kind, 'gamma_OA': arms[0].gamma_OX.kind, 'gamma_OB': arms[1].gamma_OX.kind,
        'gamma_EA': arms[0].gamma_EX.kind, 'gamma_EB': arms[1].gamma_EX.kind,
    }
    expected = {'gamma_OE': 'timelike-geodesic', 'gamma_OA': 'timelike-geodesic', 'gamma_OB': 'timelike-geodesic',
                'gamma_EA': 'null-geodesic', 'gamma_EB': 'null-geodesic'}
    wrong = {name: kind for name, kind in causal.items() if kind != expected[name]}
    if wrong:
        raise WrongCausalType(f"Experiment curves have the wrong causal character: {wrong}")

    geometry = ExperimentGeometry(
        config=config,
        spacetime_info=spacetime.describe(),
        frame_O=frame_O,
        frame_E=frame_E,
        gamma_OE=gamma_OE,
        gamma_EO=gamma_OE.reversed(spacetime),
        arm_A=arms[0],
        arm_B=arms[1],
        v_E=v_E,
        residuals=_residuals(spacetime, frame_E, v_E, arms),
    )
    failures = geometry.invariant_failures()
    if failures:
        logger.warning(f"Geometry residuals above {INVARIANT_TOL:.0e}: {failures}")
    logger.info(f"Built {spacetime.builtin_id} experiment geometry: p_A={np.round(geometry.p_A, 6).tolist()}, "
                f"p_B={np.round(geometry.p_B, 6).tolist()}")
    return geometry
