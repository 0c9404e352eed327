import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict

from geometry.exceptions import OrthogonalProjection
from geometry.helper_functions import wrap_angle, wrap_pi
from geometry.holonomy import loop_holonomy_angle, plane_angle, plane_tilt
from geometry.spacetimes import Spacetime
from geometry.transport import parallel_transport
from geometry.vectors import TangentVector

from .builder import Arm, ExperimentGeometry, emission_polarization

logger = logging.getLogger(__name__)

# B receives the opposite polarisation −v, a half-turn in its measurement plane.
B_SIDE_OFFSET = -math.pi
ADDITIVITY_TOL = 1e-6


@dataclass(frozen=True)
class HolonomyDecomposition:
    theta_A1: float
    theta_A2: float
    theta_B1: float
    theta_B2: float
    theta_OEA: float
    theta_OEB: float

    @property
    def psi_minus(self) -> float:
        return wrap_pi(self.theta_A1 - self.theta_B1)

    @property
    def additivity_defect_A(self) -> float:
        return abs(wrap_pi(self.theta_OEA - self.theta_A1 - self.theta_A2))

    @property
    def additivity_defect_B(self) -> float:
        return abs(wrap_pi(self.theta_OEB - self.theta_B1 - self.theta_B2))

    def as_tuple(self):
        return self.theta_A1, self.theta_A2, self.theta_B1, self.theta_B2

    def as_dict(self) -> Dict[str, float]:
        data = asdict(self)
        data.update({
            'psi_minus': self.psi_minus,
            'additivity_defect_A': self.additivity_defect_A,
            'additivity_defect_B': self.additivity_defect_B,
        })
        return data


@dataclass(frozen=True)
class AngleSet:
    theta_a: float
    theta_b: float
    theta_ab: float
    theta_v: float
    theta_av: float
    theta_bv: float
    theta_A1: float
    theta_A2: float
    theta_B1: float
    theta_B2: float
    theta_A: float
    theta_B: float
    phi_A: float
    phi_B: float
    psi_minus: float
    theta_plus: float
    theta_minus: float
    phi_plus: float

    def invariant_defects(self) -> Dict[str, float]:
        return {
            'theta_A': abs(wrap_pi(self.theta_A - (self.theta_av + self.theta_A1 + self.theta_A2))),
            'theta_B': abs(wrap_pi(self.theta_B - (self.theta_bv + B_SIDE_OFFSET + self.theta_B1 + self.theta_B2))),
            'theta_minus': abs(wrap_pi(self.theta_minus - (self.theta_ab + self.psi_minus + math.pi
                                                           + self.theta_A2 - self.theta_B2))),
        }

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def _source_polarization(spacetime: Spacetime, geom: ExperimentGeometry, theta_v: float):
    v_E = emission_polarization(geom.frame_E, theta_v)
    v_O = parallel_transport(spacetime, v_E, geom.gamma_EO).rebased(geom.p_O)
    return v_E, v_O


def _arm_holonomies(spacetime: Spacetime, geom: ExperimentGeometry, arm: Arm, v_E: TangentVector,
                    v_O: TangentVector):
    m_O = geom.m_O
    # the loop is traversed against the transport order of the angle definitions, hence the sign
    first = -loop_holonomy_angle(spacetime, [geom.gamma_OE, arm.gamma_Echi, arm.gamma_chiO], m_O, v_O)
    v_chi = parallel_transport(spacetime, v_E, arm.gamma_Echi).rebased(arm.p_chi)
    second = -loop_holonomy_angle(spacetime, [arm.gamma_chiE, arm.gamma_EX, arm.gamma_Xchi], arm.m_chi, v_chi)
    whole = -loop_holonomy_angle(spacetime, [geom.gamma_OE, arm.gamma_EX, arm.gamma_XO], m_O, v_O)
    return first, second, whole


def decompose_holonomy(spacetime: Spacetime, geom: ExperimentGeometry, theta_v: float = 0.0) -> HolonomyDecomposition:
    """Split each arm's loop O→E→X→O at the light-cone point into its two holonomy angles."""
    v_E, v_O = _source_polarization(spacetime, geom, theta_v)
    a1, a2, oea = _arm_holonomies(spacetime, geom, geom.arm_A, v_E, v_O)
    b1, b2, oeb = _arm_holonomies(spacetime, geom, geom.arm_B, v_E, v_O)
    decomposition = HolonomyDecomposition(a1, a2, b1, b2, oea, oeb)
    for label, defect in (('A', decomposition.additivity_defect_A), ('B', decomposition.additivity_defect_B)):
        if defect > ADDITIVITY_TOL:
            logger.warning(f"Holonomy additivity on arm {label} off by {defect:.2e}")
    return decomposition


def _measured_angle(spacetime: Spacetime, plane, direction: TangentVector, polarization: TangentVector) -> float:
    try:
        return wrap_angle(plane_angle(spacetime, plane, direction) - plane_angle(spacetime, plane, polarization))
    except OrthogonalProjection as e:
        raise OrthogonalProjection(f"{e}; the polarisation is orthogonal to the measurement plane, "
                                   f"which happens only on a measure-zero set of configurations") from e


def extract_angles(spacetime: Spacetime, geom: ExperimentGeometry, choice_A: int, choice_B: int,
                   theta_v: float) -> AngleSet:
    config = geom.config
    if not 0 <= choice_A < len(config.measurement_dirs_A):
        raise IndexError(f"choice_A={choice_A} outside the {len(config.measurement_dirs_A)} directions of A")
    if not 0 <= choice_B < len(config.measurement_dirs_B):
        raise IndexError(f"choice_B={choice_B} outside the {len(config.measurement_dirs_B)} directions of B")

    theta_a = wrap_angle(config.measurement_dirs_A[choice_A])
    theta_b = wrap_angle(config.measurement_dirs_B[choice_B])
    v_E, v_O = _source_polarization(spacetime, geom, theta_v)
    source_v = plane_angle(spacetime, geom.m_O, v_O)

    arm_A, arm_B = geom.arm_A, geom.arm_B
    v_A = parallel_transport(spacetime, v_E, arm_A.gamma_EX)
    v_B = parallel_transport(spacetime, v_E, arm_B.gamma_EX)
    theta_A = _measured_angle(spacetime, arm_A.m_X, arm_A.m_X.direction(theta_a), v_A)
    theta_B = _measured_angle(spacetime, arm_B.m_X, arm_B.m_X.direction(theta_b), -v_B)

    holonomy = decompose_holonomy(spacetime, geom, theta_v)
    angles = AngleSet(
        theta_a=theta_a,
        theta_b=theta_b,
        theta_ab=wrap_angle(theta_a - theta_b),
        theta_v=wrap_angle(theta_v),
        theta_av=wrap_angle(theta_a - source_v),
        theta_bv=wrap_angle(theta_b - source_v),
        theta_A1=holonomy.theta_A1,
        theta_A2=holonomy.theta_A2,
        theta_B1=holonomy.theta_B1,
        theta_B2=holonomy.theta_B2,
        theta_A=theta_A,
        theta_B=theta_B,
        phi_A=plane_tilt(spacetime, arm_A.m_bar_X, arm_A.m_X),
        phi_B=plane_tilt(spacetime, arm_B.m_bar_X, arm_B.m_X),
        psi_minus=holonomy.psi_minus,
        theta_plus=wrap_angle(theta_A + theta_B),
        theta_minus=wrap_angle(theta_A - theta_B),
        phi_plus=wrap_angle(theta_a + theta_b + holonomy.theta_A1 + holonomy.theta_B1 - math.pi),
    )
    worst = max(angles.invariant_defects().values())
    if worst > ADDITIVITY_TOL:
        logger.warning(f"Angle decomposition defect {worst:.2e} for choices ({choice_A}, {choice_B})")
    return angles
