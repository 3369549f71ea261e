#!/usr/bin/env python3
"""Level-Set Solver Geometry.

Projections onto the constraint sets [phi <= tau], gauge polars and
parametric support functions together with their tau-slopes. The
``ConstraintSet`` classes bundle these operations for the inner solvers.
"""

import math
from abc import ABCMeta, abstractmethod
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from errors import DomainError, InfeasibleError
from inner import lmo_l1_ball

# Absolute tolerance on the scalar multipliers found by 1-D searches.
MULTIPLIER_TOL = 1e-12


class ConstraintKind(Enum):
    """Constraint sets parameterized by the level tau."""

    L1_BALL = "l1_ball"
    ORTHANT_BUDGET = "orthant_budget"
    ELASTIC_NET_LEVEL = "elastic_net_level"
    CONIC_SLICE = "conic_slice"


class PolarKind(Enum):
    """Gauge polars available to ``gauge_polar``."""

    LINF = "linf"
    NONNEG_LINEAR = "nonneg_linear"
    MINKOWSKI_SUM = "minkowski_sum"


def _check_tau(tau: float) -> None:
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau}")


def _sorted_descending(values: np.ndarray) -> np.ndarray:
    return -np.sort(-values, kind="stable")


def project_l1_ball(z: np.ndarray, tau: float) -> np.ndarray:
    """Project onto the l1 ball of radius tau by sort-and-threshold.

    Args:
        z: Point to project
        tau: Radius of the ball

    Returns:
        The Euclidean projection of z
    """
    _check_tau(tau)
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    if a.sum() <= tau:
        return z.copy()
    if tau == 0:
        return np.zeros_like(z)

    u = _sorted_descending(a)
    css = np.cumsum(u) - tau
    index = np.arange(1, u.size + 1)
    rho = index[u - css / index > 0][-1]
    theta = css[rho - 1] / rho
    return np.sign(z) * np.maximum(a - theta, 0.0)


def project_conic_slice(
    z: np.ndarray, c: np.ndarray, level: float, cone: str = "orthant"
) -> np.ndarray:
    """Project onto the slice {x >= 0 : <c, x> = level}.

    The multiplier beta of the equality constraint is located by a
    bracketed 1-D search on the monotone function
    beta -> <c, (z - beta c)_+> - level, then snapped to the exact value
    on its active set.

    Raises:
        DomainError: If the cone is not the orthant or level <= 0
        InfeasibleError: If c has no positive entry
    """
    if cone != "orthant":
        raise DomainError(f"only the nonnegative orthant is supported, got {cone}")
    if not level > 0:
        raise DomainError(f"level must be positive, got {level}")
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    if not np.any(c > 0):
        raise InfeasibleError("slice is empty: c has no positive entry")

    def residual(beta: float) -> float:
        return float(c @ np.maximum(z - beta * c, 0.0)) - level

    lo, hi = -1.0, 1.0
    while residual(lo) <= 0:
        lo *= 2.0
    while residual(hi) > 0:
        hi *= 2.0
    beta = brentq(residual, lo, hi, xtol=MULTIPLIER_TOL, rtol=4 * np.finfo(float).eps)

    active = z - beta * c > 0
    weight = float(c[active] @ c[active])
    if weight > 0:
        exact = (float(c[active] @ z[active]) - level) / weight
        if abs(residual(exact)) <= abs(residual(beta)):
            beta = exact
    return np.maximum(z - beta * c, 0.0)


def project_orthant_budget(z: np.ndarray, c_hat: np.ndarray, tau: float) -> np.ndarray:
    """Project onto {x >= 0 : <c_hat, x> <= tau}.

    Raises:
        DomainError: If any entry of c_hat is not positive or tau < 0
    """
    _check_tau(tau)
    c_hat = np.asarray(c_hat, dtype=float)
    if np.any(c_hat <= 0):
        raise DomainError("c_hat must be strictly positive")
    x = np.maximum(np.asarray(z, dtype=float), 0.0)
    if float(c_hat @ x) <= tau:
        return x
    if tau == 0:
        return np.zeros_like(x)
    return project_conic_slice(z, c_hat, tau)


def elastic_net_value(x: np.ndarray, alpha_en: float) -> float:
    """Evaluate alpha ||x||_1 + (1 - alpha)/2 ||x||_2^2."""
    x = np.asarray(x, dtype=float)
    return alpha_en * float(np.abs(x).sum()) + 0.5 * (1.0 - alpha_en) * float(x @ x)


def _check_alpha_en(alpha_en: float) -> None:
    if not 0.0 <= alpha_en <= 1.0:
        raise DomainError(f"alpha_en must lie in [0, 1], got {alpha_en}")


def _elastic_net_multiplier(a: np.ndarray, alpha: float, tau: float) -> float:
    beta = 1.0 - alpha
    u = _sorted_descending(a)
    s1 = np.cumsum(u)
    s2 = np.cumsum(u**2)
    n = u.size

    # With k active coordinates the level equation is a quadratic in lambda.
    for k in range(n, 0, -1):
        if u[k - 1] <= 0:
            continue
        lo = u[k] / alpha if k < n else 0.0
        hi = u[k - 1] / alpha
        if hi <= lo:
            continue
        qa = beta**2 * tau + 0.5 * beta * k * alpha**2
        qb = 2.0 * beta * tau + k * alpha**2
        qc = tau - alpha * s1[k - 1] - 0.5 * beta * s2[k - 1]
        disc = qb**2 - 4.0 * qa * qc
        if disc < 0:
            continue
        lam = -2.0 * qc / (qb + math.sqrt(disc))
        slack = MULTIPLIER_TOL * (1.0 + hi)
        if lo - slack <= lam <= hi + slack:
            return min(max(lam, lo), hi)

    def level_gap(lam: float) -> float:
        p = np.maximum(a - lam * alpha, 0.0)
        scale = 1.0 + lam * beta
        return tau * scale**2 - alpha * scale * p.sum() - 0.5 * beta * float(p @ p)

    return brentq(level_gap, 0.0, u[0] / alpha, xtol=MULTIPLIER_TOL)


def project_elastic_net(z: np.ndarray, alpha_en: float, tau: float) -> np.ndarray:
    """Project onto the elastic-net level set [phi_en <= tau].

    Args:
        z: Point to project
        alpha_en: Mixing weight between the l1 and squared l2 terms
        tau: Level

    Returns:
        The Euclidean projection of z
    """
    _check_alpha_en(alpha_en)
    _check_tau(tau)
    z = np.asarray(z, dtype=float)
    if elastic_net_value(z, alpha_en) <= tau:
        return z.copy()
    if tau == 0:
        return np.zeros_like(z)
    if alpha_en == 1.0:
        return project_l1_ball(z, tau)
    if alpha_en == 0.0:
        return z * min(1.0, math.sqrt(2.0 * tau) / float(np.linalg.norm(z)))

    a = np.abs(z)
    lam = _elastic_net_multiplier(a, alpha_en, tau)
    shrunk = np.maximum(a - lam * alpha_en, 0.0) / (1.0 + lam * (1.0 - alpha_en))
    return np.sign(z) * shrunk


def support_elastic_net_level(
    z: np.ndarray, alpha_en: float, tau: float
) -> Tuple[float, float]:
    """Evaluate the support function of [phi_en <= tau] and its tau-derivative.

    The value is inf_{mu > 0} tau mu + ||(|z| - mu alpha)_+||^2 / (2 (1-alpha) mu);
    its derivative in tau is the minimizing mu.

    Returns:
        Tuple of (value, mu)

    Raises:
        DomainError: If tau < 0, or tau == 0 with alpha_en == 0
    """
    _check_alpha_en(alpha_en)
    _check_tau(tau)
    a = np.abs(np.asarray(z, dtype=float))
    zinf = float(a.max()) if a.size else 0.0
    if zinf == 0:
        return 0.0, 0.0
    if alpha_en == 1.0:
        return tau * zinf, zinf
    if tau == 0:
        if alpha_en == 0.0:
            raise DomainError("the tau-slope is unbounded at tau=0 when alpha_en=0")
        return 0.0, zinf / alpha_en
    if alpha_en == 0.0:
        norm = float(np.linalg.norm(a))
        root = math.sqrt(2.0 * tau)
        return root * norm, norm / root

    alpha, beta = alpha_en, 1.0 - alpha_en

    def objective(mu: float) -> float:
        p = np.maximum(a - mu * alpha, 0.0)
        return tau * mu + float(p @ p) / (2.0 * beta * mu)

    u = _sorted_descending(a)
    s2 = np.cumsum(u**2)
    n = u.size
    mu_star: Optional[float] = None
    for k in range(1, n + 1):
        lo = u[k] / alpha if k < n else 0.0
        hi = u[k - 1] / alpha
        if hi <= lo and k < n:
            continue
        mu = math.sqrt(s2[k - 1] / (2.0 * beta * tau + k * alpha**2))
        slack = MULTIPLIER_TOL * (1.0 + hi)
        if lo - slack <= mu <= hi + slack:
            mu_star = mu
            break
    if mu_star is None:
        found = minimize_scalar(
            objective,
            bounds=(MULTIPLIER_TOL, zinf / alpha),
            method="bounded",
            options={"xatol": MULTIPLIER_TOL},
        )
        mu_star = float(found.x)
    return objective(mu_star), mu_star


def minkowski_gauge(x: np.ndarray, alpha: float, beta: float) -> float:
    """Evaluate the sharp elastic-net gauge alpha ||x||_1 + beta ||x||_2."""
    x = np.asarray(x, dtype=float)
    return alpha * float(np.abs(x).sum()) + beta * float(np.linalg.norm(x))


def gauge_polar(
    kind: PolarKind,
    z: np.ndarray,
    c_hat: Optional[np.ndarray] = None,
    alpha: Optional[float] = None,
    beta: Optional[float] = None,
) -> float:
    """Evaluate a polar gauge at z.

    Args:
        kind: Which polar to evaluate
        z: Point of evaluation
        c_hat: Positive cost vector (NONNEG_LINEAR)
        alpha: l1 weight (MINKOWSKI_SUM)
        beta: l2 weight (MINKOWSKI_SUM)

    Returns:
        The polar value

    Raises:
        DomainError: If the parameters required by ``kind`` are missing or invalid
    """
    z = np.asarray(z, dtype=float)
    if kind is PolarKind.LINF:
        return float(np.abs(z).max()) if z.size else 0.0

    if kind is PolarKind.NONNEG_LINEAR:
        if c_hat is None or np.any(np.asarray(c_hat) <= 0):
            raise DomainError("NONNEG_LINEAR polar needs a strictly positive c_hat")
        return max(0.0, float(np.max(z / np.asarray(c_hat, dtype=float))))

    alpha = 0.0 if alpha is None else float(alpha)
    beta = 0.0 if beta is None else float(beta)
    if alpha < 0 or beta < 0 or (alpha == 0 and beta == 0):
        raise DomainError(
            f"MINKOWSKI_SUM needs non-negative weights, not both zero: {alpha}, {beta}"
        )
    a = np.abs(z)
    zinf = float(a.max()) if a.size else 0.0
    if zinf == 0:
        return 0.0
    if alpha == 0:
        return float(np.linalg.norm(a)) / beta
    if beta == 0:
        return zinf / alpha

    def excess(mu: float) -> float:
        return float(np.linalg.norm(np.maximum(a - mu * alpha, 0.0))) - mu * beta

    return brentq(excess, 0.0, zinf / alpha, xtol=MULTIPLIER_TOL)


class ConstraintSet(metaclass=ABCMeta):
    """A closed convex set [phi <= tau] (possibly intersected with a cone)."""

    kind: ConstraintKind

    @abstractmethod
    def project(self, z: np.ndarray, tau: float) -> np.ndarray:
        """Return the Euclidean projection of z onto the set at level tau."""

    @abstractmethod
    def support(self, w: np.ndarray, tau: float) -> Tuple[float, float]:
        """Return the support function at w and its derivative in tau."""

    @abstractmethod
    def level(self, x: np.ndarray) -> float:
        """Return phi(x)."""

    @property
    def has_lmo(self) -> bool:
        """Check whether a linear minimization oracle is available."""
        return False

    def lmo(self, g: np.ndarray, tau: float) -> np.ndarray:
        """Return a minimizer of <g, x> over the set at level tau."""
        raise NotImplementedError(f"{self.kind.value} has no linear minimization")

    def contains(self, x: np.ndarray, tau: float, tol: float = 1e-9) -> bool:
        """Check membership up to a tolerance."""
        return self.level(x) <= tau + tol * (1.0 + abs(tau))


class L1Ball(ConstraintSet):
    """The l1 ball {||x||_1 <= tau}."""

    kind = ConstraintKind.L1_BALL

    def project(self, z, tau):
        """Project z onto the l1 ball of radius tau."""
        return project_l1_ball(z, tau)

    def support(self, w, tau):
        """Return tau ||w||_inf and its tau-derivative ||w||_inf."""
        polar = gauge_polar(PolarKind.LINF, w)
        return tau * polar, polar

    def level(self, x):
        """Return ||x||_1."""
        return float(np.abs(x).sum())

    @property
    def has_lmo(self):
        """Check for a linear minimization oracle; the l1 ball has one."""
        return True

    def lmo(self, g, tau):
        """Return the signed vertex of the ball that minimizes <g, x>."""
        return lmo_l1_ball(g, tau)


class OrthantBudget(ConstraintSet):
    """The budget set {x >= 0 : <c_hat, x> <= tau}."""

    kind = ConstraintKind.ORTHANT_BUDGET

    def __init__(self, c_hat: np.ndarray):
        """Initialize the set.

        Args:
            c_hat: Strictly positive cost vector

        Raises:
            DomainError: If any entry of c_hat is not positive
        """
        self.c_hat = np.asarray(c_hat, dtype=float)
        if np.any(self.c_hat <= 0):
            raise DomainError("c_hat must be strictly positive")

    def project(self, z, tau):
        """Project z onto the budget set at level tau."""
        return project_orthant_budget(z, self.c_hat, tau)

    def support(self, w, tau):
        """Return tau max(0, max_i w_i / c_hat_i) and its tau-derivative."""
        polar = gauge_polar(PolarKind.NONNEG_LINEAR, w, c_hat=self.c_hat)
        return tau * polar, polar

    def level(self, x):
        """Return <c_hat, x>."""
        return float(self.c_hat @ x)

    def contains(self, x, tau, tol=1e-9):
        """Check nonnegativity and the budget up to a tolerance."""
        return bool(np.all(np.asarray(x) >= -tol)) and super().contains(x, tau, tol)

    @property
    def has_lmo(self):
        """Check for a linear minimization oracle; the budget set has one."""
        return True

    def lmo(self, g, tau):
        """Return the vertex minimizing <g, x>, the origin if no ratio is negative."""
        ratios = np.asarray(g, dtype=float) / self.c_hat
        vertex = np.zeros_like(ratios)
        j = int(np.argmin(ratios))
        if ratios[j] < 0:
            vertex[j] = tau / self.c_hat[j]
        return vertex


class ElasticNetLevel(ConstraintSet):
    """The elastic-net level set {alpha ||x||_1 + (1-alpha)/2 ||x||^2 <= tau}."""

    kind = ConstraintKind.ELASTIC_NET_LEVEL

    def __init__(self, alpha_en: float):
        """Initialize the set.

        Args:
            alpha_en: Mixing weight in [0, 1]
        """
        _check_alpha_en(alpha_en)
        self.alpha_en = alpha_en

    def project(self, z, tau):
        """Project z onto the elastic-net level set at tau."""
        return project_elastic_net(z, self.alpha_en, tau)

    def support(self, w, tau):
        """Return the support function at w and the optimal multiplier."""
        return support_elastic_net_level(w, self.alpha_en, tau)

    def level(self, x):
        """Return the elastic-net value of x."""
        return elastic_net_value(x, self.alpha_en)


class ConicSlice(ConstraintSet):
    """The slice {x >= 0 : <c, x> = tau} of the nonnegative orthant."""

    kind = ConstraintKind.CONIC_SLICE

    def __init__(self, c: np.ndarray, cone: str = "orthant"):
        """Initialize the slice.

        Args:
            c: Strictly positive normal vector
            cone: Cone being sliced; only "orthant" is supported

        Raises:
            DomainError: If the cone is unsupported or c is not positive
        """
        if cone != "orthant":
            raise DomainError(f"only the nonnegative orthant is supported, got {cone}")
        self.c = np.asarray(c, dtype=float)
        if np.any(self.c <= 0):
            raise DomainError("c must be strictly positive")

    def project(self, z, tau):
        """Project z onto the slice at level tau."""
        if tau == 0:
            return np.zeros_like(np.asarray(z, dtype=float))
        return project_conic_slice(z, self.c, tau)

    def support(self, w, tau):
        """Return tau max_i w_i / c_i and its tau-derivative."""
        ratio = float(np.max(np.asarray(w, dtype=float) / self.c))
        return tau * ratio, ratio

    def level(self, x):
        """Return <c, x>."""
        return float(self.c @ x)

    def contains(self, x, tau, tol=1e-9):
        """Check nonnegativity and <c, x> = tau up to a tolerance."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol)) and abs(self.level(x) - tau) <= tol * (
            1.0 + abs(tau)
        )
