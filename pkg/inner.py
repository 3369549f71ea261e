#!/usr/bin/env python3
"""Level-Set Solver Inner Methods.

First-order solvers for the level-set subproblem

    minimize L(Ax) subject to x in [phi <= tau],

each returning its best primal point (upper bound), its best dual
certificate y = -grad L(Ax) (lower bound Phi(y, tau)) and the tau-slope
of the dual value at that certificate.
"""

import logging
import math
from typing import TYPE_CHECKING, Callable, Optional, Tuple

import numpy as np

from errors import DomainError, DomainViolationError, OracleError
from models import FWStepRule, InnerResult

if TYPE_CHECKING:
    from geometry import ConstraintSet
    from misfits import DataFit

logger = logging.getLogger(__name__)

StopRule = Callable[[InnerResult], bool]

MAX_DOMAIN_HALVINGS = 60


def lmo_l1_ball(g: np.ndarray, tau: float) -> np.ndarray:
    """Minimize <g, z> over the l1 ball of radius tau.

    Ties in |g| resolve to the smallest index; g = 0 yields tau * e_1.
    """
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau}")
    g = np.asarray(g, dtype=float)
    vertex = np.zeros_like(g)
    if tau == 0 or g.size == 0:
        return vertex
    j = int(np.argmax(np.abs(g)))
    vertex[j] = -tau * np.sign(g[j]) if g[j] != 0 else tau
    return vertex


def estimate_lipschitz(
    A: np.ndarray,
    iterations: int = 20,
    tol: float = 1e-6,
    safety: float = 1.05,
    seed: int = 0,
) -> float:
    """Estimate ||A||_2^2 by power iteration on A^T A.

    Args:
        A: Dense matrix
        iterations: Maximum number of power iterations
        tol: Relative change at which the iteration stops early
        safety: Factor applied to the final estimate
        seed: Seed of the starting vector

    Returns:
        safety times the largest-eigenvalue estimate
    """
    A = np.asarray(A, dtype=float)
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        w = A.T @ (A @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0:
            return 0.0
        v = w / norm
        converged = abs(norm - estimate) <= tol * norm
        estimate = norm
        if converged:
            break
    return safety * estimate


class _BoundTracker:
    """Best upper bound, best certificate and its slope over an inner run."""

    def __init__(self, A, loss, constraint, tau):
        self.A = A
        self.loss = loss
        self.constraint = constraint
        self.tau = tau
        self.upper = math.inf
        self.lower = -math.inf
        self.x: Optional[np.ndarray] = None
        self.y: Optional[np.ndarray] = None
        self.slope = 0.0

    def observe(self, x: np.ndarray, fx: float, gx: np.ndarray) -> float:
        """Record the iterate and return the dual value of its certificate."""
        if fx < self.upper or self.x is None:
            self.upper = fx
            self.x = x.copy()
        y = -gx
        support, dslope = self.constraint.support(self.A.T @ y, self.tau)
        phi = self.loss.dual_term(y) - support
        if phi > self.lower:
            self.lower = phi
            self.y = y.copy()
            self.slope = -dslope
        return phi

    def result(self, iterations: int, converged: bool = False) -> InnerResult:
        y = self.y if self.y is not None else np.zeros(self.A.shape[0])
        return InnerResult(
            x=self.x.copy(),
            y=y.copy(),
            lower=min(self.lower, self.upper),
            upper=self.upper,
            slope=self.slope,
            iterations=iterations,
            converged=converged,
        )


def _finish(tracker, k, tol_additive, stop) -> Tuple[InnerResult, bool]:
    result = tracker.result(k)
    done = result.gap <= tol_additive or (stop is not None and stop(result))
    result.converged = done
    return result, done


def accelerated_projected_gradient(
    A: np.ndarray,
    loss: "DataFit",
    constraint: "ConstraintSet",
    tau: float,
    x0: np.ndarray,
    tol_additive: float,
    max_iter: int,
    lipschitz: Optional[float] = None,
    stop: Optional[StopRule] = None,
) -> InnerResult:
    """Run FISTA with function-value restarts on the level-set subproblem.

    Args:
        A: Dense operator
        loss: Smooth loss with a Lipschitz gradient
        constraint: Constraint set providing projections
        tau: Level
        x0: Warm start (projected before use)
        tol_additive: Stop once upper - lower falls below this gap
        max_iter: Maximum number of gradient steps
        lipschitz: Lipschitz constant of x -> A^T grad L(Ax); estimated if None
        stop: Optional extra stopping rule applied to the running bounds

    Returns:
        InnerResult with converged=False if the budget ran out

    Raises:
        DomainError: If the loss gradient is not Lipschitz
    """
    if loss.lipschitz is None:
        raise DomainError("accelerated projected gradient needs a Lipschitz loss")
    A = np.asarray(A, dtype=float)
    if lipschitz is None:
        lipschitz = loss.lipschitz * estimate_lipschitz(A)
    step = 1.0 / max(lipschitz, np.finfo(float).tiny)

    tracker = _BoundTracker(A, loss, constraint, tau)
    x = constraint.project(np.asarray(x0, dtype=float), tau)
    fx, gx = loss.value_grad(A @ x)
    z = x.copy()
    t = 1.0
    restarts = 0
    for k in range(max_iter + 1):
        tracker.observe(x, fx, gx)
        result, done = _finish(tracker, k, tol_additive, stop)
        if done or k == max_iter:
            break
        _, gz = loss.value_grad(A @ z)
        x_new = constraint.project(z - step * (A.T @ gz), tau)
        f_new, g_new = loss.value_grad(A @ x_new)
        if f_new > fx:
            restarts += 1
            t_new = 1.0
            z = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, gx, t = x_new, f_new, g_new, t_new

    logger.debug(
        "APG tau=%.6g iters=%d gap=%.3e restarts=%d",
        tau,
        result.iterations,
        result.gap,
        restarts,
    )
    return result


def frank_wolfe(
    A: np.ndarray,
    loss: "DataFit",
    constraint: "ConstraintSet",
    tau: float,
    x0: np.ndarray,
    step: FWStepRule = FWStepRule.CANONICAL,
    tol_additive: float = 0.0,
    max_iter: int = 1000,
    stop: Optional[StopRule] = None,
    check_identity: bool = False,
) -> InnerResult:
    """Run Frank-Wolfe with running upper/lower bounds.

    The lower bound of iteration i is L(Ax_i) + <A^T grad L(Ax_i), s_i - x_i>,
    which coincides with the dual value Phi(y_i, tau) at y_i = -grad L(Ax_i);
    ``check_identity`` verifies that coincidence on every iteration.

    Raises:
        DomainError: If the set has no LMO, line search is requested for a
            non-quadratic loss or short steps for a loss without a
            Lipschitz gradient
        DomainViolationError: If a step cannot be kept in the loss domain
        OracleError: If the certificate identity check fails
    """
    if not constraint.has_lmo:
        raise DomainError(f"{constraint.kind.value} has no linear minimization oracle")
    if step is FWStepRule.EXACT_LINE_SEARCH and loss.curvature is None:
        raise DomainError("exact line search needs a quadratic loss")
    if step is FWStepRule.SHORT_STEP and loss.lipschitz is None:
        raise DomainError("short steps need a loss with a Lipschitz gradient")
    A = np.asarray(A, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    if not constraint.contains(x, tau):
        x = np.zeros(A.shape[1])
    fx, gx = loss.value_grad(A @ x)
    if not (math.isfinite(fx) and loss.in_domain(A @ x)):
        raise DomainViolationError("Frank-Wolfe start lies outside the loss domain")

    tracker = _BoundTracker(A, loss, constraint, tau)
    for k in range(max_iter + 1):
        grad = A.T @ gx
        vertex = constraint.lmo(grad, tau)
        direction = vertex - x
        phi = tracker.observe(x, fx, gx)
        if check_identity:
            fw_lower = fx + float(grad @ direction)
            scale = 1.0 + abs(fx) + abs(float(grad @ x)) + abs(float(grad @ vertex))
            if abs(fw_lower - phi) > 1e-9 * scale:
                raise OracleError(
                    f"certificate identity failed at iteration {k}: "
                    f"{fw_lower!r} != {phi!r}"
                )
        result, done = _finish(tracker, k, tol_additive, stop)
        if done or k == max_iter:
            break

        if step is FWStepRule.CANONICAL:
            t = 2.0 / (k + 2.0)
        else:
            Ad = A @ direction
            if step is FWStepRule.EXACT_LINE_SEARCH:
                curvature = loss.curvature * float(Ad @ Ad)
            else:
                # Minimizer of the quadratic upper model of the loss.
                curvature = loss.lipschitz * float(Ad @ Ad)
            t = 0.0 if curvature <= 0 else -float(gx @ Ad) / curvature
            t = min(max(t, 0.0), 1.0)

        for _ in range(MAX_DOMAIN_HALVINGS):
            x_new = x + t * direction
            z_new = A @ x_new
            if loss.in_domain(z_new):
                f_new, g_new = loss.value_grad(z_new)
                if math.isfinite(f_new):
                    break
            t *= 0.5
        else:
            raise DomainViolationError(
                f"Frank-Wolfe step left the loss domain at tau={tau}"
            )
        x, fx, gx = x_new, f_new, g_new

    logger.debug(
        "FW tau=%.6g iters=%d gap=%.3e", tau, result.iterations, result.gap
    )
    return result
