#!/usr/bin/env python3
"""Level-Set Solver Root Finding.

Outer root finders for a nonincreasing convex function f with a root
tau*: the inexact secant and inexact Newton methods driven by oracles
that only certify bounds on f, their iteration bounds, and the exact
(superlinear) variants.
"""

import dataclasses
import logging
import math
import time
from typing import Callable, Optional, Tuple

from errors import DomainError, NonNegativeSlopeError, OracleError
from models import (
    MinorantEvaluation,
    RootConfig,
    RootMethod,
    RootResult,
    RootStatus,
    SolveTrace,
    TraceRecord,
)

logger = logging.getLogger(__name__)

ValueOracle = Callable[[float, float], MinorantEvaluation]

SLOPE_FLOOR = -1e-300
STALL_STEP = 1e-14
STALL_COUNT = 5
# Above this observed accuracy ratio the secant method has no termination guarantee.
NO_GUARANTEE_RATIO = 2.0


def newton_step(lower: float, slope: float) -> float:
    """Return the step -lower/slope of a minorant through (tau, lower)."""
    return -lower / slope


def secant_slope(u_prev: float, lower: float, tau_prev: float, tau: float) -> float:
    """Return the slope of the line through (tau_prev, u_prev) and (tau, lower)."""
    return (u_prev - lower) / (tau_prev - tau)


def theorem_constant(slope: float, tau: float, tau_star: float, lower: float) -> float:
    """Return max{|slope| (tau* - tau), lower}, the constant of the iteration bounds."""
    return max(abs(slope) * (tau_star - tau), lower)


def iteration_bound(C: float, epsilon: float, alpha: float, mode: RootMethod) -> int:
    """Return the worst-case iteration count of the inexact secant or Newton method.

    Args:
        C: Problem constant (see ``theorem_constant``)
        epsilon: Target accuracy on f-values
        alpha: Oracle accuracy in (1, 2)
        mode: Which method the bound is for

    Returns:
        ceil(max{2 + log_{2/alpha}(2C/eps), 3}) for secant,
        ceil(max{1 + log_{2/alpha}(2C/eps), 2}) for Newton

    Raises:
        DomainError: If alpha is outside (1, 2) or C, epsilon are not positive
    """
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    if not (C > 0 and epsilon > 0):
        raise DomainError(f"C and epsilon must be positive, got {C} and {epsilon}")
    log_term = math.log(2.0 * C / epsilon) / math.log(2.0 / alpha)
    if mode is RootMethod.SECANT:
        return math.ceil(max(2.0 + log_term, 3.0))
    return math.ceil(max(1.0 + log_term, 2.0))


class _RunMonitor:
    """Trace recording, stall detection and result assembly for one run."""

    def __init__(self, cfg: RootConfig, method: str, record_timing: bool):
        self.cfg = cfg
        self.method = method
        self.record_timing = record_timing
        self.trace = SolveTrace()
        self.started = time.perf_counter()
        self.small_steps = 0
        self.no_guarantee = False

    def record(self, k: int, evaluation: MinorantEvaluation, slope) -> None:
        elapsed = None
        if self.record_timing:
            elapsed = 1000.0 * (time.perf_counter() - self.started)
        if evaluation.lower > 0 and evaluation.upper / evaluation.lower >= (
            NO_GUARANTEE_RATIO
        ):
            self.no_guarantee = True
        self.trace.append(
            TraceRecord(
                k=k,
                tau=evaluation.tau,
                lower=evaluation.lower,
                upper=evaluation.upper,
                slope=slope,
                inner_iterations=evaluation.inner_iterations,
                elapsed_ms=elapsed,
            )
        )
        logger.debug(
            "%s k=%d tau=%.12g lower=%.6g upper=%.6g slope=%s inner=%d",
            self.method,
            k,
            evaluation.tau,
            evaluation.lower,
            evaluation.upper,
            slope,
            evaluation.inner_iterations,
        )

    def tiny_step(self, step: float, tau: float) -> bool:
        if step < STALL_STEP * max(1.0, abs(tau)):
            self.small_steps += 1
        else:
            self.small_steps = 0
        return self.small_steps >= STALL_COUNT

    def result(
        self,
        tau: float,
        k: int,
        status: RootStatus,
        evaluation: Optional[MinorantEvaluation],
        error: Optional[Exception] = None,
        message: str = "",
    ) -> RootResult:
        if status is RootStatus.CONVERGED:
            logger.info("%s converged at tau=%.12g after %d", self.method, tau, k)
        else:
            logger.warning(
                "%s stopped with %s at tau=%.12g after %d: %s",
                self.method,
                status.value,
                tau,
                k,
                message,
            )
        return RootResult(
            tau=tau,
            iterations=k,
            status=status,
            trace=self.trace,
            evaluation=evaluation,
            error=error,
            message=message,
        )

    def failure(self, tau: float, k: int, error: OracleError) -> RootResult:
        best = getattr(error, "best", None)
        return self.result(tau, k, RootStatus.ORACLE_ERROR, best, error, str(error))

    def exhausted(self, tau: float, evaluation: MinorantEvaluation) -> RootResult:
        if self.no_guarantee:
            return self.result(
                tau,
                self.cfg.max_outer,
                RootStatus.STALLED,
                evaluation,
                message=f"oracle accuracy reached {NO_GUARANTEE_RATIO} or more",
            )
        return self.result(
            tau,
            self.cfg.max_outer,
            RootStatus.MAX_ITERATIONS,
            evaluation,
            message=f"no epsilon-root within {self.cfg.max_outer} iterations",
        )


def _query(oracle: ValueOracle, tau: float, cfg: RootConfig, u_prev: float):
    evaluation = oracle(tau, cfg.alpha)
    return dataclasses.replace(evaluation, upper=min(evaluation.upper, u_prev))


def _nonpositive_lower(evaluation: MinorantEvaluation) -> OracleError:
    return OracleError(
        f"lower bound {evaluation.lower} is not positive at tau={evaluation.tau} "
        f"while the upper bound is {evaluation.upper}"
    )


def newton_solve(
    oracle: ValueOracle, cfg: RootConfig, record_timing: bool = False
) -> RootResult:
    """Find an epsilon-root with the inexact Newton method.

    Each iteration queries an affine minorant (lower, upper, slope), clamps
    upper to the previous one and steps to the root of the minorant.

    Args:
        oracle: Affine-minorant oracle called as oracle(tau, alpha)
        cfg: Accuracy targets, safeguards and the start tau0
        record_timing: Record wall time per iteration in the trace

    Returns:
        RootResult with the final tau and the full trace

    Raises:
        NonNegativeSlopeError: If the oracle reports a slope >= -1e-300
    """
    monitor = _RunMonitor(cfg, "newton", record_timing)
    tau = cfg.tau0
    u_prev = math.inf
    evaluation = None
    for k in range(cfg.max_outer + 1):
        try:
            evaluation = _query(oracle, tau, cfg, u_prev)
        except OracleError as error:
            return monitor.failure(tau, k, error)
        monitor.record(k, evaluation, evaluation.slope)
        if evaluation.upper <= cfg.epsilon:
            return monitor.result(tau, k, RootStatus.CONVERGED, evaluation)
        if evaluation.lower <= 0:
            return monitor.failure(tau, k, _nonpositive_lower(evaluation))
        if evaluation.slope is None:
            return monitor.failure(tau, k, OracleError("oracle returned no slope"))
        if evaluation.slope >= SLOPE_FLOOR:
            raise NonNegativeSlopeError(evaluation.slope, tau, monitor.trace)
        if k == cfg.max_outer:
            break
        step = newton_step(evaluation.lower, evaluation.slope)
        if monitor.tiny_step(step, tau):
            return monitor.result(
                tau, k, RootStatus.STALLED, evaluation, message="steps vanished"
            )
        tau += step
        u_prev = evaluation.upper
    return monitor.exhausted(tau, evaluation)


def secant_solve(
    oracle: ValueOracle, cfg: RootConfig, record_timing: bool = False
) -> RootResult:
    """Find an epsilon-root with the inexact secant method.

    The slope at iteration k joins (tau_{k-1}, u_{k-1}) to (tau_k, l_k);
    only bounds on f are needed.

    Args:
        oracle: Inexact-evaluation oracle called as oracle(tau, alpha)
        cfg: Accuracy targets, safeguards and the starts tau0 < tau1
        record_timing: Record wall time per iteration in the trace

    Returns:
        RootResult with the final tau and the full trace

    Raises:
        DomainError: If cfg.tau1 is missing
        NonNegativeSlopeError: If a secant slope is >= -1e-300
    """
    if cfg.tau1 is None:
        raise DomainError("the secant method needs tau1")
    monitor = _RunMonitor(cfg, "secant", record_timing)
    tau = cfg.tau0
    try:
        evaluation = _query(oracle, tau, cfg, math.inf)
    except OracleError as error:
        return monitor.failure(tau, 0, error)
    monitor.record(0, evaluation, None)
    if evaluation.upper <= cfg.epsilon:
        return monitor.result(tau, 0, RootStatus.CONVERGED, evaluation)

    tau_prev, u_prev = tau, evaluation.upper
    tau = cfg.tau1
    for k in range(1, cfg.max_outer + 1):
        try:
            evaluation = _query(oracle, tau, cfg, u_prev)
        except OracleError as error:
            return monitor.failure(tau, k, error)
        if evaluation.upper <= cfg.epsilon:
            monitor.record(k, evaluation, None)
            return monitor.result(tau, k, RootStatus.CONVERGED, evaluation)
        slope = secant_slope(u_prev, evaluation.lower, tau_prev, tau)
        monitor.record(k, evaluation, slope)
        if evaluation.lower <= 0:
            return monitor.failure(tau, k, _nonpositive_lower(evaluation))
        if slope >= SLOPE_FLOOR:
            raise NonNegativeSlopeError(slope, tau, monitor.trace)
        if k == cfg.max_outer:
            break
        step = newton_step(evaluation.lower, slope)
        if monitor.tiny_step(step, tau):
            return monitor.result(
                tau, k, RootStatus.STALLED, evaluation, message="steps vanished"
            )
        tau_prev, u_prev = tau, evaluation.upper
        tau += step
    return monitor.exhausted(tau, evaluation)


ExactFunction = Callable[[float], Tuple[float, float]]


def exact_root_solve(
    f: ExactFunction,
    mode: RootMethod,
    tau0: float,
    tau1: Optional[float] = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> RootResult:
    """Find a root of an exactly evaluable convex decreasing function.

    Args:
        f: Callable returning (f(tau), subgradient at tau)
        mode: Newton or secant
        tau0: Start, left of the root
        tau1: Second start for the secant method (tau0 < tau1)
        tol: Stop once |f(tau_k)| <= tol
        max_iter: Maximum index of the returned iterate

    Returns:
        RootResult whose trace records f-values as both bounds and the
        subgradient (Newton) or secant slope used at each step

    Raises:
        DomainError: If the secant starts are missing or unordered
        NonNegativeSlopeError: If a slope is >= -1e-300
    """
    if mode is RootMethod.SECANT and (tau1 is None or not tau0 < tau1):
        raise DomainError(f"secant mode needs tau0 < tau1, got {tau0} and {tau1}")
    trace = SolveTrace()

    def visit(k: int, tau: float):
        value, grad = f(tau)
        trace.append(
            TraceRecord(k=k, tau=tau, lower=value, upper=value, slope=grad)
        )
        return value, grad

    def finish(tau: float, k: int, value: float) -> Optional[RootResult]:
        if abs(value) <= tol:
            return RootResult(tau, k, RootStatus.CONVERGED, trace)
        if value < 0:
            return RootResult(
                tau, k, RootStatus.STALLED, trace, message="iterate passed the root"
            )
        return None

    tau = tau0
    value, grad = visit(0, tau)
    done = finish(tau, 0, value)
    if done is not None:
        return done
    tau_prev, value_prev = tau, value
    k = 0
    if mode is RootMethod.SECANT:
        tau = tau1
        value, grad = visit(1, tau)
        k = 1
        done = finish(tau, k, value)
        if done is not None:
            return done

    while k < max_iter:
        if mode is RootMethod.NEWTON:
            slope = grad
        else:
            slope = secant_slope(value_prev, value, tau_prev, tau)
        if slope >= SLOPE_FLOOR:
            raise NonNegativeSlopeError(slope, tau, trace)
        tau_prev, value_prev = tau, value
        tau = tau + newton_step(value, slope)
        k += 1
        value, grad = visit(k, tau)
        done = finish(tau, k, value)
        if done is not None:
            return done
    return RootResult(
        tau,
        k,
        RootStatus.MAX_ITERATIONS,
        trace,
        message=f"|f| above {tol} after {max_iter} iterations",
    )
