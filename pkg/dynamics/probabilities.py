import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from scenario.angles import B_SIDE_OFFSET, AngleSet

from .distributions import AngleDistribution, JointAngleDistribution
from .exceptions import ResolutionTooLow
from .quadrature import distribution_average
from .response import OUTCOMES, ResponseFunction, require_outcome

logger = logging.getLogger(__name__)

SUM_TOL = 1e-9


def _index(outcome: int) -> int:
    return OUTCOMES.index(require_outcome(outcome))


@dataclass
class OutcomeProbabilities:
    """p(A, B | i_A, i_B) for the four outcome pairs; rows are A = +1, −1 and columns B = +1, −1."""

    table: np.ndarray
    method: str = 'quad'
    stderr: Optional[np.ndarray] = None
    context: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float).reshape(2, 2)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float).reshape(2, 2)

    def p(self, A: int, B: int) -> float:
        return float(self.table[_index(A), _index(B)])

    def marginal_A(self, A: int = 1) -> float:
        return float(self.table[_index(A)].sum())

    def marginal_B(self, B: int = 1) -> float:
        return float(self.table[:, _index(B)].sum())

    @property
    def total(self) -> float:
        return float(self.table.sum())

    def check(self, tol: float = SUM_TOL) -> 'OutcomeProbabilities':
        if np.any(self.table < -tol) or np.any(self.table > 1.0 + tol):
            raise ValueError(f"{self.method} probabilities leave [0, 1]: {self.table.tolist()}")
        if abs(self.total - 1.0) > tol:
            raise ValueError(f"{self.method} probabilities sum to {self.total:.12f}")
        return self

    def as_records(self, theta_ab: Optional[float] = None) -> List[Dict[str, Any]]:
        records = []
        for A in OUTCOMES:
            for B in OUTCOMES:
                records.append({
                    'theta_ab': theta_ab,
                    'A': A,
                    'B': B,
                    'method': self.method,
                    'value': self.p(A, B),
                    'stderr': None if self.stderr is None else float(self.stderr[_index(A), _index(B)]),
                })
        return records


def outcome_table(probability: Callable[[int, int], float], method: str, **context) -> OutcomeProbabilities:
    table = [[probability(A, B) for B in OUTCOMES] for A in OUTCOMES]
    return OutcomeProbabilities(np.array(table), method=method, context=context)


def correlation(probabilities: OutcomeProbabilities) -> float:
    """E = p(++) + p(−−) − p(+−) − p(−+)."""
    t = probabilities.table
    return float(t[0, 0] + t[1, 1] - t[0, 1] - t[1, 0])


def chsh_value(e_ab: float, e_ab_prime: float, e_a_prime_b: float, e_a_prime_b_prime: float) -> float:
    return abs(e_ab - e_ab_prime) + abs(e_a_prime_b + e_a_prime_b_prime)


def outcome_covariance(probabilities: OutcomeProbabilities) -> float:
    return probabilities.p(1, 1) - probabilities.marginal_A(1) * probabilities.marginal_B(1)


# closed forms

def iv_closed_form(A: int, B: int, theta_minus: float) -> float:
    """Average of f(A,θ_A)f(B,θ_B) over a uniform θ_v under the Malus response."""
    if require_outcome(A) == require_outcome(B):
        return 0.25 * (0.5 + math.cos(theta_minus) ** 2)
    return 0.25 * (0.5 + math.sin(theta_minus) ** 2)


def quantum_target(A: int, B: int, theta_ab: float) -> float:
    if require_outcome(A) == require_outcome(B):
        return 0.5 * math.sin(0.5 * theta_ab) ** 2
    return 0.5 * math.cos(0.5 * theta_ab) ** 2


# quadratures

def iv_quadrature(response: ResponseFunction, theta_v_dist: AngleDistribution, A: int, B: int,
                  theta_a: float, theta_b: float, theta_A1: float = 0.0, theta_B1: float = 0.0,
                  nodes: Optional[int] = None) -> float:
    """∫ P(θ_v) f(A, θ_a − θ_v + θ_A1) f(B, θ_b − θ_v − π + θ_B1) dθ_v, outside-J⁻(p_E) holonomies zero."""

    def integrand(theta_v):
        theta_A = theta_a - theta_v + theta_A1
        theta_B = theta_b - theta_v + B_SIDE_OFFSET + theta_B1
        return response(A, theta_A) * response(B, theta_B)

    return distribution_average(integrand, theta_v_dist, nodes)


def pe_context(angles: AngleSet) -> Tuple[float, float]:
    """θ_A and θ_B with the outside-J⁻(p_E) holonomies removed."""
    return (angles.theta_av + angles.theta_A1,
            angles.theta_bv + B_SIDE_OFFSET + angles.theta_B1)


def pe_marginal(response: ResponseFunction, theta_2_dist: AngleDistribution, outcome: int, base: float) -> float:
    """∫ P(θ_X2) f(X, base + θ_X2) dθ_X2 for one observer."""
    support = theta_2_dist.support()
    angles = base + theta_2_dist.nodes[support]
    return float(theta_2_dist.masses[support] @ response(outcome, angles))


def pe_probability(response: ResponseFunction, theta_A2_dist: AngleDistribution, theta_B2_dist: AngleDistribution,
                   A: int, B: int, context: Tuple[float, float]) -> float:
    """Probability conditioned on everything in J⁻(p_E); factorises into the two observers' marginals."""
    base_A, base_B = context
    return pe_marginal(response, theta_A2_dist, A, base_A) * pe_marginal(response, theta_B2_dist, B, base_B)


def _smeared_response(response: ResponseFunction, outcome: int, base: np.ndarray,
                      theta_2_dist: AngleDistribution) -> np.ndarray:
    """G[...] = Σ_k P(θ_2 = k) f(outcome, base + θ_2,k), evaluated over an array of base angles."""
    smeared = np.zeros_like(base)
    nodes, masses = theta_2_dist.nodes, theta_2_dist.masses
    for k in theta_2_dist.support():
        smeared += masses[k] * response(outcome, base + nodes[k])
    return smeared


def _po_kernels(response: ResponseFunction, theta_v_dist: AngleDistribution, joint: JointAngleDistribution,
                theta_A2_dist: AngleDistribution, theta_B2_dist: AngleDistribution, A: int, B: int,
                theta_a: float, theta_b: float):
    if joint.n < settings.QUADRATURE_MIN_NODES:
        raise ResolutionTooLow(f"Joint (θ_A1, θ_B1) grid of {joint.n} bins is below "
                               f"{settings.QUADRATURE_MIN_NODES}")
    v_support = theta_v_dist.support()
    theta_v = theta_v_dist.nodes[v_support][:, None]
    kernel_A = _smeared_response(response, A, theta_a - theta_v + joint.nodes_A[None, :], theta_A2_dist)
    kernel_B = _smeared_response(response, B, theta_b - theta_v + B_SIDE_OFFSET + joint.nodes_B[None, :],
                                 theta_B2_dist)
    return theta_v_dist.masses[v_support], kernel_A, kernel_B


def po_probability(response: ResponseFunction, theta_v_dist: AngleDistribution, joint: JointAngleDistribution,
                   theta_A2_dist: AngleDistribution, theta_B2_dist: AngleDistribution, A: int, B: int,
                   theta_a: float, theta_b: float) -> float:
    """Probability at p_O: the P_E integrals averaged over P(θ_v) and the joint P(θ_A1, θ_B1)."""
    weights, kernel_A, kernel_B = _po_kernels(response, theta_v_dist, joint, theta_A2_dist, theta_B2_dist,
                                              A, B, theta_a, theta_b)
    return float(np.einsum('v,vi,ij,vj->', weights, kernel_A, joint.masses, kernel_B))


def po_marginals(response: ResponseFunction, theta_v_dist: AngleDistribution, joint: JointAngleDistribution,
                 theta_A2_dist: AngleDistribution, theta_B2_dist: AngleDistribution,
                 theta_a: float, theta_b: float, A: int = 1, B: int = 1) -> Tuple[float, float]:
    """(p_A(A), p_B(B)) at p_O."""
    weights, kernel_A, kernel_B = _po_kernels(response, theta_v_dist, joint, theta_A2_dist, theta_B2_dist,
                                              A, B, theta_a, theta_b)
    p_A = float(np.einsum('v,vi,i->', weights, kernel_A, joint.masses.sum(axis=1)))
    p_B = float(np.einsum('v,vj,j->', weights, kernel_B, joint.masses.sum(axis=0)))
    return p_A, p_B


def simp_probability(psi_dist: AngleDistribution, A: int, B: int, theta_ab: float) -> float:
    """∫ P(ψ₋) I_v(A, B) dψ₋ with θ_− = θ_ab + ψ₋ + π, at the distribution's own bins."""
    support = psi_dist.support()
    theta_minus = theta_ab + psi_dist.nodes[support] + math.pi
    if require_outcome(A) == require_outcome(B):
        values = 0.25 * (0.5 + np.cos(theta_minus) ** 2)
    else:
        values = 0.25 * (0.5 + np.sin(theta_minus) ** 2)
    return float(psi_dist.masses[support] @ values)


# four-outcome tables

def closed_form_table(theta_minus: float) -> OutcomeProbabilities:
    return outcome_table(lambda A, B: iv_closed_form(A, B, theta_minus), 'closed', theta_minus=theta_minus)


def simp_table(psi_dist: AngleDistribution, theta_ab: float) -> OutcomeProbabilities:
    return outcome_table(lambda A, B: simp_probability(psi_dist, A, B, theta_ab), 'simp', theta_ab=theta_ab)


def quad_table(response: ResponseFunction, theta_v_dist: AngleDistribution, theta_a: float, theta_b: float,
               theta_A1: float = 0.0, theta_B1: float = 0.0, nodes: Optional[int] = None) -> OutcomeProbabilities:
    return outcome_table(
        lambda A, B: iv_quadrature(response, theta_v_dist, A, B, theta_a, theta_b, theta_A1, theta_B1, nodes),
        'quad', theta_ab=theta_a - theta_b,
    )


def pe_table(response: ResponseFunction, theta_A2_dist: AngleDistribution, theta_B2_dist: AngleDistribution,
             context: Tuple[float, float]) -> OutcomeProbabilities:
    return outcome_table(lambda A, B: pe_probability(response, theta_A2_dist, theta_B2_dist, A, B, context), 'pe')


def po_table(response: ResponseFunction, theta_v_dist: AngleDistribution, joint: JointAngleDistribution,
             theta_A2_dist: AngleDistribution, theta_B2_dist: AngleDistribution,
             theta_a: float, theta_b: float) -> OutcomeProbabilities:
    return outcome_table(
        lambda A, B: po_probability(response, theta_v_dist, joint, theta_A2_dist, theta_B2_dist, A, B,
                                    theta_a, theta_b),
        'po', theta_ab=theta_a - theta_b,
    )


def quantum_table(theta_ab: float) -> OutcomeProbabilities:
    return outcome_table(lambda A, B: quantum_target(A, B, theta_ab), 'quantum', theta_ab=theta_ab)
