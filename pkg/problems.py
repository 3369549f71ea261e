#!/usr/bin/env python3
"""Level-Set Solver Problems.

End-to-end solvers for the application classes handled by the
level-set approach: basis pursuit denoising, linear programs, sparse
generalized linear models, robust sparse regression and elastic-net
regression. Each problem

    minimize phi(x) subject to rho(Ax - b) <= sigma

is solved by finding the root of f(tau) = v(tau) - sigma, where v is the
value of the flipped problem

    minimize rho(Ax - b) subject to phi(x) <= tau.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from errors import (
    BadShiftError,
    DomainError,
    InfeasibleError,
    NonNegativeSlopeError,
    NotStrictlyFeasibleError,
)
from geometry import ConstraintSet, ElasticNetLevel, L1Ball, OrthantBudget
from misfits import (
    DataFit,
    FamilyKind,
    GLMFamily,
    GLMFit,
    Misfit,
    MisfitKind,
    ResidualFit,
)
from models import (
    FWStepRule,
    InnerConfig,
    InnerMethod,
    RootConfig,
    RootMethod,
    RootStatus,
    Solution,
    SolveStatus,
    SolveTrace,
)
from oracle import make_value_oracle
from rootfind import newton_solve, secant_solve

logger = logging.getLogger(__name__)

# The tau-slope of the ridge level set is unbounded at tau = 0.
RIDGE_START = 1e-6

FW_MAX_ITER = 100000

_ROOT_TO_SOLVE = {
    RootStatus.CONVERGED: SolveStatus.CONVERGED,
    RootStatus.STALLED: SolveStatus.STALLED,
    RootStatus.MAX_ITERATIONS: SolveStatus.MAX_ITERATIONS,
    RootStatus.ORACLE_ERROR: SolveStatus.ORACLE_ERROR,
}


@dataclass
class LevelSetProblem:
    """A level-set problem min phi(x) s.t. misfit(Ax) <= sigma.

    Attributes:
        A: Dense m x n operator
        fit: Smooth loss L(Ax) minimized by the inner solver
        constraint: The level sets [phi <= tau]
        sigma: Misfit level
        squared: The inner loss is 1/2 ||Ax - b||^2 while the misfit is
            ||Ax - b||, so bounds are converted before root finding
        name: Label used in logs
    """

    A: np.ndarray
    fit: DataFit
    constraint: ConstraintSet
    sigma: float
    squared: bool = False
    name: str = "level-set"

    def __post_init__(self):
        """Validate the problem data."""
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            raise DomainError(f"A must be a matrix, got shape {self.A.shape}")
        b = getattr(self.fit, "b", None)
        if b is not None and b.shape != (self.A.shape[0],):
            raise DomainError(
                f"b has shape {b.shape} but A has {self.A.shape[0]} rows"
            )
        # GLM losses drop their normalization constant and may be negative.
        if self.sigma < 0 and not isinstance(self.fit, GLMFit):
            raise DomainError(f"sigma must be non-negative, got {self.sigma}")

    def misfit_value(self, x: np.ndarray) -> float:
        """Return the misfit at x on the scale sigma is stated in."""
        value = self.fit.value(self.A @ x)
        if self.squared:
            return math.sqrt(max(2.0 * value, 0.0))
        return value

    def objective(self, x: np.ndarray) -> float:
        """Return phi(x)."""
        return self.constraint.level(x)


def _inner_config(
    inner: Union[InnerMethod, InnerConfig, None], fit: DataFit
) -> InnerConfig:
    if isinstance(inner, InnerConfig):
        return inner
    if inner is None:
        inner = InnerMethod.APG if fit.lipschitz is not None else InnerMethod.FW
    if inner is InnerMethod.APG:
        return InnerConfig(method=inner)
    if fit.curvature is not None:
        step = FWStepRule.EXACT_LINE_SEARCH
    elif fit.lipschitz is not None:
        step = FWStepRule.SHORT_STEP
    else:
        step = FWStepRule.CANONICAL
    return InnerConfig(method=inner, step=step, max_iter=FW_MAX_ITER)


def solve_level_set(
    problem: LevelSetProblem,
    epsilon: float,
    alpha: float,
    inner: Union[InnerMethod, InnerConfig, None] = None,
    method: RootMethod = RootMethod.NEWTON,
    tau0: float = 0.0,
    tau1: Optional[float] = None,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Solution:
    """Solve a level-set problem by root finding on its value function.

    Args:
        problem: The problem to solve
        epsilon: Accuracy target on the misfit
        alpha: Oracle accuracy in (1, 2)
        inner: Inner solver; APG when the loss gradient is Lipschitz,
            Frank-Wolfe otherwise
        method: Outer root finder
        tau0: Starting level
        tau1: Second starting level for the secant method
        max_outer: Outer iteration budget
        record_timing: Record wall time per outer iteration

    Returns:
        Solution whose x is the primal point certifying the last upper bound
    """
    config = _inner_config(inner, problem.fit)
    if method is RootMethod.SECANT and tau1 is None:
        tau1 = tau0 + 1.0
    cfg = RootConfig(epsilon, alpha, max_outer=max_outer, tau0=tau0, tau1=tau1)
    oracle = make_value_oracle(problem, config, epsilon)
    solver = newton_solve if method is RootMethod.NEWTON else secant_solve
    logger.info(
        "solving %s with %s outer, %s inner, sigma=%g eps=%g alpha=%g",
        problem.name,
        method.value,
        config.method.value,
        problem.sigma,
        epsilon,
        alpha,
    )

    try:
        root = solver(oracle, cfg, record_timing)
    except NonNegativeSlopeError as error:
        logger.warning("%s is infeasible: %s", problem.name, error)
        x = oracle.warm
        return _assemble(
            problem,
            x,
            error.tau,
            epsilon,
            SolveStatus.INFEASIBLE,
            error.trace if error.trace is not None else SolveTrace(),
            None,
            f"minorant with slope {error.slope} stays positive: no root exists",
        )

    status = _ROOT_TO_SOLVE[root.status]
    if isinstance(root.error, InfeasibleError):
        status = SolveStatus.INFEASIBLE
    evaluation = root.evaluation
    if evaluation is not None and evaluation.primal is not None:
        x = evaluation.primal
    else:
        x = oracle.warm
    return _assemble(
        problem, x, root.tau, epsilon, status, root.trace, evaluation, root.message
    )


def _assemble(problem, x, tau, epsilon, status, trace, evaluation, message) -> Solution:
    x = np.asarray(x, dtype=float).copy()
    solution = Solution(
        x=x,
        tau_star_estimate=float(tau),
        misfit_at_x=problem.misfit_value(x),
        objective=problem.objective(x),
        sigma=problem.sigma,
        epsilon=epsilon,
        status=status,
        trace=trace,
        certificates=evaluation,
        message=message,
    )
    logger.info(
        "%s finished %s: tau=%.9g objective=%.9g misfit=%.9g",
        problem.name,
        status.value,
        solution.tau_star_estimate,
        solution.objective,
        solution.misfit_at_x,
    )
    return solution


def solve_bpdn(
    A: np.ndarray,
    b: np.ndarray,
    sigma: float,
    epsilon: float,
    alpha: float,
    inner: Union[InnerMethod, InnerConfig] = InnerMethod.APG,
    method: RootMethod = RootMethod.NEWTON,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Solution:
    """Solve min ||x||_1 s.t. ||Ax - b||_2 <= sigma.

    The inner solver works on 1/2 ||Ax - b||^2 while the outer Newton
    method runs on ||Ax - b||_2 - sigma.
    """
    problem = LevelSetProblem(
        A=A,
        fit=ResidualFit(Misfit(MisfitKind.SUM_SQUARES), b),
        constraint=L1Ball(),
        sigma=sigma,
        squared=True,
        name="bpdn",
    )
    return solve_level_set(
        problem,
        epsilon,
        alpha,
        inner=inner,
        method=method,
        max_outer=max_outer,
        record_timing=record_timing,
    )


def solve_lp(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    y_hat: Optional[np.ndarray] = None,
    epsilon: float = 1e-4,
    alpha: float = 1.5,
    inner: Optional[InnerConfig] = None,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Solution:
    """Solve min <c, x> s.t. Ax = b, x >= 0 to epsilon-feasibility.

    With the shifted cost c_hat = c - A^T y_hat > 0 the problem becomes
    min <c_hat, x> s.t. ||Ax - b|| <= 0 over the orthant, whose level sets
    are the budget sets {x >= 0 : <c_hat, x> <= tau}.

    Args:
        A: Constraint matrix
        b: Right-hand side
        c: Cost vector
        y_hat: Dual point making c_hat strictly positive (zero if None)
        epsilon: Feasibility target ||Ax - b|| <= epsilon
        alpha: Oracle accuracy
        inner: Inner solver configuration (APG over the budget set)
        max_outer: Outer iteration budget
        record_timing: Record wall time per outer iteration

    Returns:
        Solution with extras ``lp_objective`` (<c, x>) and ``objective_slack``
        (epsilon ||y_hat||, the excess allowed over the optimal value)

    Raises:
        BadShiftError: If some entry of c - A^T y_hat is not positive
        DomainError: If b is zero
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    y_hat = np.zeros(A.shape[0]) if y_hat is None else np.asarray(y_hat, dtype=float)
    c_hat = c - A.T @ y_hat
    if np.any(c_hat <= 0):
        bad = np.flatnonzero(c_hat <= 0)
        raise BadShiftError(
            f"c - A^T y_hat must be strictly positive; entries {bad.tolist()} are not"
        )
    if not np.any(b):
        raise DomainError("b must be nonzero")

    problem = LevelSetProblem(
        A=A,
        fit=ResidualFit(Misfit(MisfitKind.SUM_SQUARES), b),
        constraint=OrthantBudget(c_hat),
        sigma=0.0,
        squared=True,
        name="lp",
    )
    solution = solve_level_set(
        problem,
        epsilon,
        alpha,
        inner=inner or InnerConfig(method=InnerMethod.APG, max_iter=50000),
        max_outer=max_outer,
        record_timing=record_timing,
    )
    solution.extras = {
        "lp_objective": float(c @ solution.x),
        "objective_slack": epsilon * float(np.linalg.norm(y_hat)),
    }
    return solution


def glm_level(
    family: GLMFamily,
    b: np.ndarray,
    eta: float,
    offset: Optional[np.ndarray] = None,
) -> float:
    """Return the calibrated level L(b; 0) / eta."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    fit = GLMFit(family, b, offset)
    return fit.value(np.zeros_like(fit.b)) / eta


def solve_glm(
    family: GLMFamily,
    A: np.ndarray,
    b: np.ndarray,
    sigma: Optional[float] = None,
    eta: Optional[float] = None,
    gauge: Optional[ConstraintSet] = None,
    epsilon: float = 1e-3,
    alpha: float = 1.5,
    inner: Union[InnerMethod, InnerConfig, None] = None,
    offset: Optional[np.ndarray] = None,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Solution:
    """Solve min phi(x) s.t. L(b; Ax) <= sigma for a GLM family.

    Args:
        family: GLM family of the observations
        A: Design matrix
        b: Observations
        sigma: Likelihood level; computed as L(b; 0) / eta when None
        eta: Calibration ratio used when sigma is None
        gauge: Level sets of the regularizer (l1 ball by default)
        epsilon: Accuracy target on the loss
        alpha: Oracle accuracy
        inner: Inner solver, Frank-Wolfe by default
        offset: Fixed offset of the linear predictor; required and entrywise
            negative for the Gamma family
        max_outer: Outer iteration budget
        record_timing: Record wall time per outer iteration

    Raises:
        DomainError: If neither sigma nor eta is given, b is invalid or a
            Gamma model lacks a negative offset
    """
    if family.kind is FamilyKind.GAMMA and (
        offset is None or not np.all(np.asarray(offset, dtype=float) < 0)
    ):
        raise DomainError(
            "Gamma needs a negative offset so that the origin lies in its domain"
        )
    if sigma is None:
        if eta is None:
            raise DomainError("either sigma or eta must be given")
        sigma = glm_level(family, b, eta, offset)
    problem = LevelSetProblem(
        A=A,
        fit=GLMFit(family, b, offset),
        constraint=gauge or L1Ball(),
        sigma=sigma,
        name=f"glm-{family.kind.value}",
    )
    return solve_level_set(
        problem,
        epsilon,
        alpha,
        inner=InnerMethod.FW if inner is None else inner,
        max_outer=max_outer,
        record_timing=record_timing,
    )


def solve_robust_sparse(
    A: np.ndarray,
    b: np.ndarray,
    sigma: float,
    kappa: float,
    q: float,
    epsilon: float,
    alpha: float,
    inner: Union[InnerMethod, InnerConfig, None] = None,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Solution:
    """Solve min ||x||_1 s.t. rho_{kappa,q}(b - Ax) <= sigma.

    q > 1/2 penalizes positive residuals b - Ax less than negative ones,
    so positive outliers remain visible in the residual.
    Frank-Wolfe runs the inner problems unless another solver is given.
    """
    problem = LevelSetProblem(
        A=A,
        fit=ResidualFit(Misfit(MisfitKind.QUANTILE_HUBER, kappa, q), b, flip=True),
        constraint=L1Ball(),
        sigma=sigma,
        name="robust",
    )
    return solve_level_set(
        problem,
        epsilon,
        alpha,
        inner=InnerMethod.FW if inner is None else inner,
        max_outer=max_outer,
        record_timing=record_timing,
    )


def solve_elastic_net(
    A: np.ndarray,
    b: np.ndarray,
    sigma: float,
    alpha_en: float,
    kappa: float,
    epsilon: float,
    alpha: float,
    inner: Optional[InnerConfig] = None,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Solution:
    """Solve the elastic-net problem with a Huber misfit constraint.

    minimize alpha_en ||x||_1 + (1-alpha_en)/2 ||x||^2 s.t. huber(Ax - b) <= sigma
    """
    problem = LevelSetProblem(
        A=A,
        fit=ResidualFit(Misfit(MisfitKind.HUBER, kappa), b),
        constraint=ElasticNetLevel(alpha_en),
        sigma=sigma,
        name="elastic-net",
    )
    return solve_level_set(
        problem,
        epsilon,
        alpha,
        inner=inner or InnerConfig(method=InnerMethod.APG),
        tau0=RIDGE_START if alpha_en == 0 else 0.0,
        max_outer=max_outer,
        record_timing=record_timing,
    )


def recover_feasible(
    z: np.ndarray, e: np.ndarray, problem: LevelSetProblem, delta: float
) -> np.ndarray:
    """Move an epsilon-feasible point radially towards a strictly feasible one.

    Args:
        z: Super-optimal, epsilon-feasible point
        e: Strictly feasible point, misfit(e) < sigma
        problem: The problem both points belong to
        delta: Target relative optimality gap

    Returns:
        x = z + a (e - z) with misfit(x) <= sigma

    Raises:
        NotStrictlyFeasibleError: If misfit(e) >= sigma
    """
    z = np.asarray(z, dtype=float)
    e = np.asarray(e, dtype=float)
    sigma = problem.sigma
    rho_e = problem.misfit_value(e)
    if rho_e >= sigma:
        raise NotStrictlyFeasibleError(
            f"misfit {rho_e} of the anchor point is not below sigma={sigma}"
        )
    rho_z = problem.misfit_value(z)
    if rho_z <= sigma:
        logger.info("point is already feasible (misfit %g <= %g)", rho_z, sigma)
        return z.copy()
    if rho_z - sigma > delta * (sigma - rho_e):
        logger.warning(
            "misfit excess %g exceeds %g; the objective gap may exceed delta=%g",
            rho_z - sigma,
            delta * (sigma - rho_e),
            delta,
        )
    weight = (rho_z - sigma) / (rho_z - rho_e)
    return z + weight * (e - z)


@dataclass(frozen=True)
class OutlierSpec:
    """Outliers added to the measurements."""

    count: int = 0
    low: float = 0.0
    high: float = 0.5
    sign: str = "positive"

    def __post_init__(self):
        """Validate the outlier settings."""
        if self.count < 0:
            raise DomainError(f"outlier count must be non-negative, got {self.count}")
        if self.low > self.high:
            raise DomainError(f"empty outlier range [{self.low}, {self.high}]")
        if self.sign not in ("positive", "negative", "symmetric"):
            raise DomainError(f"Unknown outlier sign: {self.sign}")


@dataclass(frozen=True)
class InstanceSpec:
    """A seeded sparse-recovery instance."""

    n: int
    m: int
    k: int
    noise_std: float = 0.0
    outliers: OutlierSpec = field(default_factory=OutlierSpec)
    seed: int = 0

    def __post_init__(self):
        """Validate the dimensions."""
        if min(self.n, self.m) < 1:
            raise DomainError(f"n and m must be positive, got {self.n} and {self.m}")
        if not 0 <= self.k <= self.n:
            raise DomainError(f"k must lie in [0, n={self.n}], got {self.k}")
        if self.outliers.count > self.m:
            raise DomainError(
                f"{self.outliers.count} outliers exceed m={self.m} measurements"
            )
        if self.noise_std < 0:
            raise DomainError(f"noise_std must be non-negative, got {self.noise_std}")


def generate_instance(
    spec: InstanceSpec,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Generate A, b, x_true and the outlier indices of a sparse-recovery instance.

    A is Gaussian with unit-norm columns and x_true has k spikes of +-1.
    """
    rng = np.random.default_rng(spec.seed)
    A = rng.standard_normal((spec.m, spec.n))
    A /= np.linalg.norm(A, axis=0)
    x_true = np.zeros(spec.n)
    support = rng.choice(spec.n, size=spec.k, replace=False)
    x_true[support] = rng.choice([-1.0, 1.0], size=spec.k)
    b = A @ x_true + spec.noise_std * rng.standard_normal(spec.m)

    outliers = spec.outliers
    indices = np.sort(rng.choice(spec.m, size=outliers.count, replace=False))
    magnitudes = rng.uniform(outliers.low, outliers.high, size=outliers.count)
    if outliers.sign == "negative":
        magnitudes = -magnitudes
    elif outliers.sign == "symmetric":
        magnitudes *= rng.choice([-1.0, 1.0], size=outliers.count)
    b[indices] += magnitudes
    return A, b, x_true, indices.astype(int)


PRESETS: Dict[str, Dict] = {
    "paper-example": {
        "instance": InstanceSpec(
            n=400,
            m=100,
            k=10,
            noise_std=0.01,
            outliers=OutlierSpec(count=6, low=0.0, high=0.5, sign="positive"),
        ),
        "kappa": 0.1,
        "q": 0.9,
        "sigma_fraction": 0.05,
    },
}


def robust_level(b: np.ndarray, kappa: float, q: float, fraction: float) -> float:
    """Return fraction * rho_{kappa,q}(b), the level used by the robust preset."""
    fit = ResidualFit(Misfit(MisfitKind.QUANTILE_HUBER, kappa, q), b, flip=True)
    return fraction * fit.value(np.zeros_like(fit.b))


def top_positive_residuals(residual: np.ndarray, count: int) -> np.ndarray:
    """Return the sorted indices of the count largest entries of a residual."""
    order = np.argsort(-np.asarray(residual, dtype=float), kind="stable")
    return np.sort(order[:count])


def outlier_hits(residual: np.ndarray, outliers: np.ndarray) -> int:
    """Count the outliers among the len(outliers) largest residual entries."""
    found = top_positive_residuals(residual, len(outliers))
    return int(np.intersect1d(found, outliers).size)


def compare_robust_fits(
    A: np.ndarray,
    b: np.ndarray,
    x_true: np.ndarray,
    outliers: np.ndarray,
    kappa: float,
    q: float,
    fraction: float,
    epsilon: float,
    alpha: float,
    inner: Union[InnerMethod, InnerConfig, None] = None,
    max_outer: int = 200,
    record_timing: bool = False,
) -> Tuple[Dict[str, Solution], Dict[str, float]]:
    """Fit quantile Huber, symmetric Huber and least squares to one instance.

    The Huber fits use the level fraction * rho(b) of their own misfit and
    least squares uses fraction * ||b||.

    Returns:
        The solutions keyed "qh", "huber" and "ls", and the metrics
        "<model>_signal_error" and "<model>_outlier_hits" of each
    """
    options = {"max_outer": max_outer, "record_timing": record_timing}
    fits = {
        "qh": solve_robust_sparse(
            A,
            b,
            robust_level(b, kappa, q, fraction),
            kappa,
            q,
            epsilon,
            alpha,
            inner=inner,
            **options,
        ),
        "huber": solve_robust_sparse(
            A,
            b,
            robust_level(b, kappa, 0.5, fraction),
            kappa,
            0.5,
            epsilon,
            alpha,
            inner=inner,
            **options,
        ),
        "ls": solve_bpdn(
            A, b, fraction * float(np.linalg.norm(b)), epsilon, alpha, **options
        ),
    }
    metrics: Dict[str, float] = {}
    for name, solution in fits.items():
        if solution.status is not SolveStatus.CONVERGED:
            logger.warning("%s fit stopped with status %s", name, solution.status.value)
        error = float(np.linalg.norm(solution.x - x_true))
        hits = outlier_hits(b - A @ solution.x, outliers)
        metrics[f"{name}_signal_error"] = error
        metrics[f"{name}_outlier_hits"] = float(hits)
        logger.info("%s: signal error %.4g, %d outlier hits", name, error, hits)
    return fits, metrics
