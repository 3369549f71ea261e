#!/usr/bin/env python3
"""Level-Set Solver Misfits.

Residual misfits and generalized-linear-model losses with gradients,
convex conjugates and the dual-value evaluators that certify lower
bounds on the level-set value function.

Inner solvers consume a loss through the ``DataFit`` interface: a
smooth function L(z) of the linear predictor z = Ax, together with the
dual term -L*(-y) that enters the dual objective
Phi(y, tau) = -L*(-y) - support_{[phi <= tau]}(A^T y).
"""

import math
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import expit, xlogy

from errors import DomainError


ArrayLike = Union[float, np.ndarray]

# Slack when testing membership in the domain of a conjugate.
DOMAIN_SLACK = 1e-12


class MisfitKind(Enum):
    """Residual misfit families."""

    NORM2 = "norm2"
    SUM_SQUARES = "sum_squares"
    HUBER = "huber"
    QUANTILE_HUBER = "quantile_huber"


@dataclass(frozen=True)
class Misfit:
    """A residual misfit rho with its smoothing and quantile parameters."""

    kind: MisfitKind
    kappa: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        """Validate the parameters."""
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 < self.q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")

    @property
    def gradient_lipschitz(self) -> Optional[float]:
        """Get the Lipschitz constant of the gradient, if there is one."""
        if self.kind in (MisfitKind.SUM_SQUARES, MisfitKind.HUBER):
            return 1.0
        if self.kind is MisfitKind.QUANTILE_HUBER:
            return 1.0 / self.kappa
        return None


def misfit_eval(misfit: Misfit, r: np.ndarray) -> Tuple[float, np.ndarray]:
    """Evaluate a misfit and its gradient at a residual vector.

    Args:
        misfit: The misfit to evaluate
        r: Residual vector

    Returns:
        Tuple of (value, gradient)
    """
    r = np.asarray(r, dtype=float)
    kind = misfit.kind

    if kind is MisfitKind.NORM2:
        norm = float(np.linalg.norm(r))
        grad = r / norm if norm > 0 else np.zeros_like(r)
        return norm, grad

    if kind is MisfitKind.SUM_SQUARES:
        return 0.5 * float(r @ r), r.copy()

    kappa = misfit.kappa
    if kind is MisfitKind.HUBER:
        absr = np.abs(r)
        pieces = np.where(absr <= kappa, 0.5 * r**2, kappa * absr - 0.5 * kappa**2)
        return float(np.sum(pieces)), np.clip(r, -kappa, kappa)

    # Quantile Huber: breakpoints at -q*kappa and (1-q)*kappa.
    q = misfit.q
    left = r < -q * kappa
    right = r > (1.0 - q) * kappa
    pieces = r**2 / (2.0 * kappa)
    pieces = np.where(left, -q * r - 0.5 * kappa * q**2, pieces)
    pieces = np.where(right, (1.0 - q) * r - 0.5 * kappa * (1.0 - q) ** 2, pieces)
    return float(np.sum(pieces)), np.clip(r / kappa, -q, 1.0 - q)


def misfit_conjugate(misfit: Misfit, w: np.ndarray) -> float:
    """Evaluate the convex conjugate rho*(w); +inf outside its domain."""
    w = np.asarray(w, dtype=float)
    kind = misfit.kind

    if kind is MisfitKind.NORM2:
        return 0.0 if np.linalg.norm(w) <= 1.0 + DOMAIN_SLACK else math.inf
    if kind is MisfitKind.SUM_SQUARES:
        return 0.5 * float(w @ w)
    if kind is MisfitKind.HUBER:
        if np.any(np.abs(w) > misfit.kappa * (1.0 + DOMAIN_SLACK)):
            return math.inf
        return 0.5 * float(w @ w)

    q = misfit.q
    if np.any(w < -q - DOMAIN_SLACK) or np.any(w > 1.0 - q + DOMAIN_SLACK):
        return math.inf
    return 0.5 * misfit.kappa * float(w @ w)


class FamilyKind(Enum):
    """Canonical exponential families."""

    GAUSSIAN = "gaussian"
    HUBER = "huber"
    POISSON = "poisson"
    BERNOULLI = "bernoulli"
    GAMMA = "gamma"


@dataclass(frozen=True)
class GLMFamily:
    """A GLM family with its dispersion (and Huber width for the Huber family)."""

    kind: FamilyKind
    dispersion: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        """Validate the parameters."""
        if not self.dispersion > 0:
            raise DomainError(f"dispersion must be positive, got {self.dispersion}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")

    @property
    def gradient_lipschitz(self) -> Optional[float]:
        """Get the Lipschitz constant of the loss gradient in z, if bounded."""
        if self.kind in (FamilyKind.GAUSSIAN, FamilyKind.HUBER):
            return 1.0 / self.dispersion
        if self.kind is FamilyKind.BERNOULLI:
            return 0.25 / self.dispersion
        return None


def validate_observations(family: GLMFamily, b: np.ndarray) -> None:
    """Check that observations lie in the data domain of a family.

    Raises:
        DomainError: If an observation is outside the family's domain
    """
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise DomainError("observations must be finite")
    if family.kind is FamilyKind.BERNOULLI and not np.all((b == 0) | (b == 1)):
        raise DomainError("Bernoulli observations must be 0 or 1")
    if family.kind is FamilyKind.POISSON and np.any(b < 0):
        raise DomainError("Poisson observations must be non-negative")
    if family.kind is FamilyKind.GAMMA and np.any(b <= 0):
        raise DomainError("Gamma observations must be positive")


def cumulant(family: GLMFamily, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate the cumulant c(theta) and its derivative elementwise.

    Gamma values outside theta < 0 are +inf with a NaN derivative.
    """
    theta = np.asarray(theta, dtype=float)
    kind = family.kind
    if kind is FamilyKind.GAUSSIAN:
        return 0.5 * theta**2, theta.copy()
    if kind is FamilyKind.HUBER:
        kappa = family.kappa
        abst = np.abs(theta)
        value = np.where(abst <= kappa, 0.5 * theta**2, kappa * abst - 0.5 * kappa**2)
        return value, np.clip(theta, -kappa, kappa)
    if kind is FamilyKind.POISSON:
        value = np.exp(theta)
        return value, value.copy()
    if kind is FamilyKind.BERNOULLI:
        return np.logaddexp(0.0, theta), expit(theta)

    inside = theta < 0
    safe = np.where(inside, theta, -1.0)
    value = np.where(inside, -np.log(-safe), np.inf)
    derivative = np.where(inside, -1.0 / safe, np.nan)
    return value, derivative


def glm_loss(
    family: GLMFamily, b: np.ndarray, z: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Evaluate the negative log-likelihood sum((c(z_i) - b_i z_i) / phi).

    The normalization constant is dropped; ``glm_dual_value`` drops it too.

    Args:
        family: The GLM family
        b: Observations
        z: Linear predictor

    Returns:
        Tuple of (value, gradient with respect to z); the value is +inf
        when z leaves the family domain

    Raises:
        DomainError: If the observations are invalid for the family
    """
    validate_observations(family, b)
    b = np.asarray(b, dtype=float)
    c, dc = cumulant(family, z)
    phi = family.dispersion
    if not np.all(np.isfinite(c)):
        return math.inf, np.full_like(b, np.nan)
    value = float(np.sum(c - b * np.asarray(z, dtype=float))) / phi
    return value, (dc - b) / phi


def glm_conjugate(family: GLMFamily, w: ArrayLike) -> ArrayLike:
    """Evaluate c*(w) elementwise, +inf outside the conjugate domain.

    Gamma uses c*(w) = -1 - log(w) on w > 0, the conjugate of
    c(theta) = -log(-theta).
    """
    w_arr = np.asarray(w, dtype=float)
    kind = family.kind
    if kind is FamilyKind.GAUSSIAN:
        out = 0.5 * w_arr**2
    elif kind is FamilyKind.HUBER:
        inside = np.abs(w_arr) <= family.kappa * (1.0 + DOMAIN_SLACK)
        out = np.where(inside, 0.5 * w_arr**2, np.inf)
    elif kind is FamilyKind.POISSON:
        inside = w_arr >= 0
        safe = np.where(inside, w_arr, 0.0)
        out = np.where(inside, xlogy(safe, safe) - safe, np.inf)
    elif kind is FamilyKind.BERNOULLI:
        inside = (w_arr >= 0) & (w_arr <= 1)
        safe = np.clip(w_arr, 0.0, 1.0)
        out = np.where(inside, xlogy(safe, safe) + xlogy(1 - safe, 1 - safe), np.inf)
    else:
        inside = w_arr > 0
        safe = np.where(inside, w_arr, 1.0)
        out = np.where(inside, -1.0 - np.log(safe), np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def glm_dual_value(
    family: GLMFamily,
    y: np.ndarray,
    tau: float,
    b: np.ndarray,
    polar_of_ATy: float,
    offset: Optional[np.ndarray] = None,
) -> float:
    """Evaluate the GLM dual objective at a dual point.

    Returns -(1/phi) sum c*(b_i - phi y_i) - tau * polar_of_ATy (minus
    <y, offset> when the predictor carries an offset), or -inf when
    b - phi y leaves the conjugate domain.
    """
    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    phi = family.dispersion
    conj = np.asarray(glm_conjugate(family, b - phi * y))
    if not np.all(np.isfinite(conj)):
        return -math.inf
    value = -float(np.sum(conj)) / phi - tau * polar_of_ATy
    if offset is not None:
        value -= float(y @ offset)
    return value


class DataFit(metaclass=ABCMeta):
    """A smooth loss L(z) of the linear predictor z = Ax.

    Attributes:
        lipschitz: Lipschitz constant of the gradient, None when unbounded
        curvature: c for quadratic losses whose Hessian is c * I, else None
    """

    lipschitz: Optional[float] = None
    curvature: Optional[float] = None

    @abstractmethod
    def value_grad(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        """Return L(z) and its gradient."""

    @abstractmethod
    def dual_term(self, y: np.ndarray) -> float:
        """Return -L*(-y)."""

    def value(self, z: np.ndarray) -> float:
        """Return L(z)."""
        return self.value_grad(z)[0]

    def in_domain(self, z: np.ndarray) -> bool:
        """Check whether L is finite at z."""
        return True


class ResidualFit(DataFit):
    """Residual misfit rho(z - b), or rho(b - z) when ``flip`` is set."""

    def __init__(self, misfit: Misfit, b: np.ndarray, flip: bool = False):
        """Initialize the loss.

        Args:
            misfit: Residual misfit rho
            b: Data vector
            flip: Evaluate rho on b - z instead of z - b
        """
        if misfit.kind is MisfitKind.NORM2:
            raise DomainError(
                "the 2-norm is not smooth; solve its squared form with SUM_SQUARES"
            )
        self.misfit = misfit
        self.b = np.asarray(b, dtype=float)
        self.flip = flip
        self.lipschitz = misfit.gradient_lipschitz
        if misfit.kind is MisfitKind.SUM_SQUARES:
            self.curvature = 1.0

    def value_grad(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        if self.flip:
            value, grad = misfit_eval(self.misfit, self.b - z)
            return value, -grad
        return misfit_eval(self.misfit, z - self.b)

    def dual_term(self, y: np.ndarray) -> float:
        w = y if self.flip else -y
        return float(self.b @ y) - misfit_conjugate(self.misfit, w)


class GLMFit(DataFit):
    """GLM negative log-likelihood of the predictor z + offset."""

    def __init__(
        self, family: GLMFamily, b: np.ndarray, offset: Optional[np.ndarray] = None
    ):
        """Initialize the loss.

        Args:
            family: The GLM family
            b: Observations
            offset: Optional fixed offset added to the linear predictor

        Raises:
            DomainError: If the observations are invalid for the family
        """
        validate_observations(family, b)
        self.family = family
        self.b = np.asarray(b, dtype=float)
        self.offset = None if offset is None else np.asarray(offset, dtype=float)
        if self.offset is not None and self.offset.shape != self.b.shape:
            raise DomainError(
                f"offset shape {self.offset.shape} does not match {self.b.shape}"
            )
        self.lipschitz = family.gradient_lipschitz
        if family.kind is FamilyKind.GAUSSIAN:
            self.curvature = 1.0 / family.dispersion

    def _predictor(self, z: np.ndarray) -> np.ndarray:
        return z if self.offset is None else z + self.offset

    def value_grad(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        return glm_loss(self.family, self.b, self._predictor(z))

    def dual_term(self, y: np.ndarray) -> float:
        return glm_dual_value(self.family, y, 0.0, self.b, 0.0, self.offset)

    def in_domain(self, z: np.ndarray) -> bool:
        if self.family.kind is not FamilyKind.GAMMA:
            return True
        return bool(np.all(self._predictor(z) < 0))
