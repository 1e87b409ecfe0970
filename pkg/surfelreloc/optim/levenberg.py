"""Dense Levenberg-Marquardt over a manifold state."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Generic, List, NamedTuple, Optional, TypeVar

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

State = TypeVar("State")

_LAMBDA_MAX = 1e16


class Linearization(NamedTuple):
    cost: float
    H: np.ndarray
    g: np.ndarray


class LeastSquaresProblem(ABC, Generic[State]):
    """Robust least-squares problem linearized as Gauss-Newton normal equations.

    ``g`` is the gradient ``J^T W r`` so the Gauss-Newton step solves ``H dx = -g``.
    """

    @abstractmethod
    def linearize(self, state: State) -> Optional[Linearization]:
        """Cost, ``H`` and ``g`` at ``state``; ``None`` if any residual is invalid."""
        pass

    @abstractmethod
    def cost(self, state: State) -> Optional[float]:
        """Robust cost at ``state``; ``None`` if any residual is invalid."""
        pass

    @abstractmethod
    def retract(self, state: State, delta: np.ndarray) -> State:
        pass


@dataclass
class LMResult(Generic[State]):
    state: Any
    initial_cost: float
    final_cost: float
    iterations: int
    status: str  # converged, max-iterations, stalled, non-finite
    history: List[dict] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status != "non-finite"


def levenberg_marquardt(
    problem: LeastSquaresProblem,
    state,
    max_iterations: int = 50,
    initial_lambda: float = 1e-4,
    rel_tol: float = 1e-8,
    lambda_up: float = 10.0,
    lambda_down: float = 0.5,
    min_cost: float = 1e-24,
) -> LMResult:
    """Minimize with Marquardt damping ``H + lambda * diag(H)``.

    Rejected steps multiply lambda by ``lambda_up``; accepted ones by ``lambda_down``.
    Stops when an accepted step lowers the cost by less than ``rel_tol`` relatively.
    """
    lin = problem.linearize(state)
    if lin is None or not np.isfinite(lin.cost):
        return LMResult(state, float("nan"), float("nan"), 0, "non-finite")
    initial = cost = float(lin.cost)
    history = [{"iteration": 0, "cost": cost, "lambda": initial_lambda, "accepted": True}]
    if cost <= min_cost:
        return LMResult(state, initial, cost, 0, "converged", history)

    lam = initial_lambda
    status = "max-iterations"
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        diag = np.maximum(np.diag(lin.H), 1e-12)
        A = lin.H + lam * np.diag(diag)
        try:
            delta = linalg.solve(A, -lin.g, assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            delta = None
        candidate = problem.retract(state, delta) if delta is not None and np.all(np.isfinite(delta)) else None
        new_cost = problem.cost(candidate) if candidate is not None else None

        accepted = new_cost is not None and np.isfinite(new_cost) and new_cost < cost
        history.append({"iteration": iteration, "cost": new_cost if accepted else cost, "lambda": lam, "accepted": bool(accepted)})
        if accepted:
            decrease = (cost - new_cost) / cost
            state, cost = candidate, float(new_cost)
            lam = max(lam * lambda_down, 1e-12)
            logger.debug("LM iteration %d accepted, cost %.6e", iteration, cost)
            if decrease < rel_tol or cost <= min_cost:
                status = "converged"
                break
            lin = problem.linearize(state)
            if lin is None or not np.isfinite(lin.cost):
                status = "stalled"
                break
        else:
            lam *= lambda_up
            logger.debug("LM iteration %d rejected, lambda %.1e", iteration, lam)
            if lam > _LAMBDA_MAX:
                status = "stalled"
                break
    return LMResult(state, initial, cost, iteration, status, history)
