import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from django.conf import settings

from dynamics.distributions import AngleDistribution

from .exceptions import InverseNoConvergence
from .problem import InverseProblem, assemble_system

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8
MOMENT_TOL = 1e-9
POLISH_EVERY = 100
SUPPORT_TOL = 1e-13


@dataclass
class InverseSolution:
    problem: InverseProblem
    density: AngleDistribution
    residual: float
    iterations: int
    gradient_norm: float
    converged: bool = True

    @property
    def moments(self) -> Tuple[float, float]:
        return self.density.moments(2)

    @property
    def feasible(self) -> bool:
        return self.residual <= FEASIBILITY_TOL

    def as_dict(self) -> Dict[str, Any]:
        c2, s2 = self.moments
        return {
            **self.problem.as_dict(),
            'residual': self.residual,
            'C2': c2,
            'S2': s2,
            'feasible': self.feasible,
            'converged': self.converged,
            'iterations': self.iterations,
            'gradient_norm': self.gradient_norm,
            'density_bins': self.density.density.tolist(),
        }


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {q ≥ 0, Σq = 1}."""
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u - cumulative / ranks > 0.0)[-1]
    return np.maximum(v - cumulative[rho] / (rho + 1.0), 0.0)


class _Objective:
    """‖Kq − r‖² + (λ/Δ)‖q‖² over bin masses q; the penalty is λ∫P² on the density."""

    def __init__(self, problem: InverseProblem):
        matrix, rhs = assemble_system(problem)
        # drop the normalization row, the simplex projection enforces it; columns act on masses
        self.K = matrix[:-1] / problem.spacing
        self.r = rhs[:-1]
        self.penalty = problem.regularization / problem.spacing
        self.lipschitz = 2.0 * (np.linalg.norm(self.K, 2) ** 2 + self.penalty)

    def value(self, q: np.ndarray) -> float:
        misfit = self.K @ q - self.r
        return float(misfit @ misfit + self.penalty * (q @ q))

    def gradient(self, q: np.ndarray) -> np.ndarray:
        return 2.0 * (self.K.T @ (self.K @ q - self.r) + self.penalty * q)

    def curvature(self, d: np.ndarray) -> float:
        Kd = self.K @ d
        return float(2.0 * (Kd @ Kd + self.penalty * (d @ d)))

    def residual(self, q: np.ndarray) -> float:
        misfit = self.K @ q - self.r
        return float(math.sqrt(misfit @ misfit / len(misfit)))

    def step(self, q: np.ndarray) -> Tuple[np.ndarray, float]:
        """Projected-gradient direction and the gradient-mapping norm that measures stationarity."""
        d = project_simplex(q - self.gradient(q) / self.lipschitz) - q
        return d, self.lipschitz * float(np.linalg.norm(d))

    def polish(self, q: np.ndarray) -> Optional[np.ndarray]:
        """Minimise on the face spanned by the support of ``q``, dropping bins that turn negative."""
        support = np.flatnonzero(q > SUPPORT_TOL)
        while support.size:
            Ks = self.K[:, support]
            m = support.size
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = 2.0 * (Ks.T @ Ks + self.penalty * np.eye(m))
            kkt[:m, m] = 1.0
            kkt[m, :m] = 1.0
            rhs = np.append(2.0 * Ks.T @ self.r, 1.0)
            x = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:m]
            if np.all(x >= -SUPPORT_TOL):
                candidate = np.zeros_like(q)
                candidate[support] = np.maximum(x, 0.0)
                return candidate / candidate.sum()
            support = support[x > SUPPORT_TOL]
        return None


def solve_nnls(problem: InverseProblem, max_iter: Optional[int] = None, tol: Optional[float] = None,
               initial: Optional[np.ndarray] = None) -> InverseSolution:
    """Nonnegative, normalised least squares for the binned P(ψ₋).

    Projected gradient on the probability simplex with an exact line search, interleaved with
    an active-set solve on the current support; stops once the gradient mapping is below ``tol``.
    """
    max_iter = int(max_iter or settings.INVERSE_MAX_ITER)
    tol = float(tol or settings.INVERSE_TOL)
    objective = _Objective(problem)
    q = np.full(problem.bins, 1.0 / problem.bins) if initial is None else project_simplex(np.asarray(initial, float))

    def solution(masses, iterations, gradient_norm, converged=True) -> InverseSolution:
        return InverseSolution(problem, AngleDistribution.from_masses(masses), objective.residual(masses),
                               iterations, gradient_norm, converged)

    best_q, best_value = q.copy(), objective.value(q)
    gradient_norm = math.inf
    for iteration in range(max_iter + 1):
        d, gradient_norm = objective.step(q)
        if gradient_norm < tol:
            logger.info(f"Inverse solver converged after {iteration} iterations, "
                        f"residual {objective.residual(q):.3e}")
            return solution(q, iteration, gradient_norm)

        if iteration and iteration % POLISH_EVERY == 0:
            candidate = objective.polish(q)
            if candidate is not None and objective.value(candidate) <= objective.value(q):
                candidate_norm = objective.step(candidate)[1]
                logger.debug(f"Active-set solve at iteration {iteration}: gradient mapping {candidate_norm:.2e}")
                q = candidate
                if candidate_norm < tol:
                    logger.info(f"Inverse solver converged on the support of {np.count_nonzero(q)} bins "
                                f"after {iteration} iterations")
                    return solution(q, iteration, candidate_norm)
                d, gradient_norm = objective.step(q)

        curvature = objective.curvature(d)
        slope = float(objective.gradient(q) @ d)
        alpha = 1.0 if curvature <= 0.0 else min(1.0, max(0.0, -slope / curvature))
        q = q + alpha * d

        value = objective.value(q)
        if value < best_value:
            best_q, best_value = q.copy(), value

    best = solution(best_q, max_iter, objective.step(best_q)[1], converged=False)
    raise InverseNoConvergence(f"No stationary point within {max_iter} iterations "
                               f"(gradient mapping {gradient_norm:.2e})", best=best)
