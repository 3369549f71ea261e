"""
Tests for the misfits module.
"""

import math

import numpy as np
import pytest

from errors import DomainError
from misfits import (
    FamilyKind,
    GLMFamily,
    GLMFit,
    Misfit,
    MisfitKind,
    ResidualFit,
    cumulant,
    glm_conjugate,
    glm_dual_value,
    glm_loss,
    misfit_conjugate,
    misfit_eval,
    validate_observations,
)


def central_difference(func, r, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    grad = np.zeros_like(r)
    for i in range(r.size):
        step = np.zeros_like(r)
        step[i] = h
        grad[i] = (func(r + step) - func(r - step)) / (2.0 * h)
    return grad


class TestMisfitEval:
    """Test cases for residual misfits."""

    def test_huber_quadratic_zone(self):
        """Test Huber inside [-kappa, kappa]."""
        value, grad = misfit_eval(Misfit(MisfitKind.HUBER, kappa=1.0), np.array([0.5]))
        assert value == pytest.approx(0.125)
        assert grad[0] == pytest.approx(0.5)

    def test_huber_linear_zone(self):
        """Test Huber outside [-kappa, kappa]."""
        value, grad = misfit_eval(Misfit(MisfitKind.HUBER, kappa=1.0), np.array([3.0]))
        assert value == pytest.approx(2.5)
        assert grad[0] == pytest.approx(1.0)

    def test_quantile_huber_left_branch(self):
        """Test the quantile Huber left branch."""
        misfit = Misfit(MisfitKind.QUANTILE_HUBER, kappa=0.4, q=0.3)
        value, grad = misfit_eval(misfit, np.array([-1.0]))
        assert value == pytest.approx(0.282)
        assert grad[0] == pytest.approx(-0.3)

    def test_norm2(self):
        """Test the 2-norm and its gradient at the origin."""
        value, grad = misfit_eval(Misfit(MisfitKind.NORM2), np.array([3.0, 4.0]))
        assert value == 5.0
        np.testing.assert_allclose(grad, [0.6, 0.8])
        _, grad = misfit_eval(Misfit(MisfitKind.NORM2), np.zeros(2))
        np.testing.assert_array_equal(grad, [0.0, 0.0])

    def test_huber_is_moreau_envelope(self):
        """Test Huber against a brute-force minimization over a fine grid."""
        kappa = 0.7
        grid = np.linspace(-10.0, 10.0, 400001)
        misfit = Misfit(MisfitKind.HUBER, kappa=kappa)
        for m in (-4.0, -0.7, -0.2, 0.0, 0.3, 1.5, 6.0):
            envelope = float(np.min(kappa * np.abs(grid) + 0.5 * (m - grid) ** 2))
            value, _ = misfit_eval(misfit, np.array([m]))
            assert value == pytest.approx(envelope, abs=1e-6)

    def test_quantile_half_is_symmetric(self):
        """Test that q = 0.5 gives an even function."""
        misfit = Misfit(MisfitKind.QUANTILE_HUBER, kappa=0.3, q=0.5)
        r = np.linspace(-2.0, 2.0, 41)
        left, _ = misfit_eval(misfit, r)
        right, _ = misfit_eval(misfit, -r)
        assert left == pytest.approx(right)

    def test_quantile_small_kappa_approaches_check_function(self):
        """Test convergence to the check function as kappa shrinks."""
        q = 0.8
        misfit = Misfit(MisfitKind.QUANTILE_HUBER, kappa=1e-6, q=q)
        for r in np.linspace(-2.0, 2.0, 21):
            value, _ = misfit_eval(misfit, np.array([r]))
            check = q * max(-r, 0.0) + (1.0 - q) * max(r, 0.0)
            assert value == pytest.approx(check, abs=1e-6)

    def test_gradients_match_finite_differences(self):
        """Test every smooth misfit against central differences."""
        rng = np.random.default_rng(11)
        misfits = [
            Misfit(MisfitKind.SUM_SQUARES),
            Misfit(MisfitKind.HUBER, kappa=0.5),
            Misfit(MisfitKind.QUANTILE_HUBER, kappa=0.5, q=0.2),
        ]
        for misfit in misfits:
            for _ in range(5):
                r = rng.standard_normal(6)
                _, grad = misfit_eval(misfit, r)
                numeric = central_difference(lambda v: misfit_eval(misfit, v)[0], r)
                np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-7)

    def test_invalid_parameters(self):
        """Test that kappa and q are validated."""
        with pytest.raises(DomainError, match="kappa"):
            Misfit(MisfitKind.HUBER, kappa=0.0)
        with pytest.raises(DomainError, match="q must lie"):
            Misfit(MisfitKind.QUANTILE_HUBER, q=1.0)


class TestMisfitConjugate:
    """Test cases for residual misfit conjugates."""

    def test_fenchel_young_equality(self):
        """Test rho(r) + rho*(grad) = <r, grad> for the smooth misfits."""
        rng = np.random.default_rng(5)
        misfits = [
            Misfit(MisfitKind.SUM_SQUARES),
            Misfit(MisfitKind.HUBER, kappa=0.4),
            Misfit(MisfitKind.QUANTILE_HUBER, kappa=0.4, q=0.7),
        ]
        for misfit in misfits:
            r = 2.0 * rng.standard_normal(8)
            value, grad = misfit_eval(misfit, r)
            assert value + misfit_conjugate(misfit, grad) == pytest.approx(
                float(r @ grad), abs=1e-10
            )

    def test_outside_domain(self):
        """Test that conjugates are infinite outside their domains."""
        huber = Misfit(MisfitKind.HUBER, kappa=0.5)
        assert misfit_conjugate(huber, np.array([0.6])) == math.inf
        norm2 = Misfit(MisfitKind.NORM2)
        assert misfit_conjugate(norm2, np.array([0.6, 0.8])) == 0.0
        assert misfit_conjugate(norm2, np.array([1.0, 1.0])) == math.inf


class TestGLMLoss:
    """Test cases for GLM losses."""

    def test_bernoulli_at_zero(self):
        """Test the Bernoulli loss at a zero predictor."""
        family = GLMFamily(FamilyKind.BERNOULLI)
        value, grad = glm_loss(family, np.array([1.0]), np.array([0.0]))
        assert value == pytest.approx(math.log(2.0))
        assert grad[0] == pytest.approx(-0.5)

    def test_gaussian(self):
        """Test the Gaussian loss against half the squared residual."""
        family = GLMFamily(FamilyKind.GAUSSIAN)
        b = np.array([1.0, -2.0, 0.5])
        z = np.array([0.0, 1.0, 2.0])
        value, grad = glm_loss(family, b, z)
        expected = 0.5 * float((z - b) @ (z - b)) - 0.5 * float(b @ b)
        assert value == pytest.approx(expected)
        np.testing.assert_allclose(grad, z - b)

    def test_poisson(self):
        """Test the Poisson loss at a zero predictor."""
        family = GLMFamily(FamilyKind.POISSON)
        value, _ = glm_loss(family, np.array([2.0]), np.array([0.0]))
        assert value == pytest.approx(1.0)

    def test_dispersion_scales(self):
        """Test that the loss is divided by the dispersion."""
        b = np.array([1.0, 3.0])
        z = np.array([0.2, 0.4])
        base, _ = glm_loss(GLMFamily(FamilyKind.POISSON), b, z)
        scaled, _ = glm_loss(GLMFamily(FamilyKind.POISSON, dispersion=2.0), b, z)
        assert scaled == pytest.approx(base / 2.0)

    def test_gamma_outside_domain(self):
        """Test that Gamma is infinite for non-negative predictors."""
        family = GLMFamily(FamilyKind.GAMMA)
        value, _ = glm_loss(family, np.array([1.0]), np.array([0.5]))
        assert value == math.inf

    def test_gradients_match_finite_differences(self):
        """Test every family against central differences."""
        rng = np.random.default_rng(3)
        cases = [
            (GLMFamily(FamilyKind.GAUSSIAN), rng.standard_normal(5), 0.0),
            (GLMFamily(FamilyKind.HUBER, kappa=0.5), rng.standard_normal(5), 0.0),
            (GLMFamily(FamilyKind.POISSON), rng.integers(0, 5, 5).astype(float), 0.0),
            (GLMFamily(FamilyKind.BERNOULLI), rng.integers(0, 2, 5).astype(float), 0.0),
            (GLMFamily(FamilyKind.GAMMA), rng.uniform(0.5, 2.0, 5), -2.0),
        ]
        for family, b, shift in cases:
            z = 0.3 * rng.standard_normal(5) + shift
            _, grad = glm_loss(family, b, z)
            numeric = central_difference(lambda v: glm_loss(family, b, v)[0], z)
            np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-7)

    def test_invalid_observations(self):
        """Test the data domain of each family."""
        with pytest.raises(DomainError, match="Bernoulli"):
            validate_observations(GLMFamily(FamilyKind.BERNOULLI), np.array([0.5]))
        with pytest.raises(DomainError, match="Poisson"):
            validate_observations(GLMFamily(FamilyKind.POISSON), np.array([-1.0]))
        with pytest.raises(DomainError, match="Gamma"):
            validate_observations(GLMFamily(FamilyKind.GAMMA), np.array([0.0]))
        with pytest.raises(DomainError, match="dispersion"):
            GLMFamily(FamilyKind.GAUSSIAN, dispersion=0.0)


class TestGLMConjugate:
    """Test cases for GLM conjugates and dual values."""

    def test_values(self):
        """Test conjugate values at hand-computed points."""
        assert glm_conjugate(GLMFamily(FamilyKind.GAUSSIAN), 2.0) == 2.0
        bernoulli = glm_conjugate(GLMFamily(FamilyKind.BERNOULLI), 0.5)
        assert bernoulli == pytest.approx(-math.log(2.0))
        assert glm_conjugate(GLMFamily(FamilyKind.POISSON), 1.0) == pytest.approx(-1.0)
        assert glm_conjugate(GLMFamily(FamilyKind.GAMMA), 1.0) == pytest.approx(-1.0)

    def test_endpoints_and_domain(self):
        """Test 0 log 0 = 0 and the infinite outside."""
        family = GLMFamily(FamilyKind.BERNOULLI)
        assert glm_conjugate(family, 0.0) == 0.0
        assert glm_conjugate(family, 1.0) == 0.0
        assert glm_conjugate(family, 1.5) == math.inf
        assert glm_conjugate(GLMFamily(FamilyKind.POISSON), -0.1) == math.inf
        assert glm_conjugate(GLMFamily(FamilyKind.GAMMA), -1.0) == math.inf

    def test_fenchel_young_equality(self):
        """Test c(theta) + c*(c'(theta)) = theta c'(theta) on grids."""
        grids = {
            FamilyKind.GAUSSIAN: np.linspace(-3.0, 3.0, 25),
            FamilyKind.HUBER: np.linspace(-3.0, 3.0, 25),
            FamilyKind.POISSON: np.linspace(-3.0, 3.0, 25),
            FamilyKind.BERNOULLI: np.linspace(-6.0, 6.0, 25),
            FamilyKind.GAMMA: np.linspace(-4.0, -0.25, 25),
        }
        for kind, theta in grids.items():
            family = GLMFamily(kind, kappa=0.8)
            c, dc = cumulant(family, theta)
            conj = np.asarray(glm_conjugate(family, dc))
            np.testing.assert_allclose(c + conj, theta * dc, atol=1e-8)

    def test_gaussian_dual_matches_squared_form(self):
        """Test the Gaussian dual value against <b, y> - ||y||^2/2 - tau * polar."""
        rng = np.random.default_rng(8)
        b = rng.standard_normal(6)
        y = rng.standard_normal(6)
        value = glm_dual_value(GLMFamily(FamilyKind.GAUSSIAN), y, 2.0, b, 0.7)
        expected = float(b @ y) - 0.5 * float(y @ y) - 0.5 * float(b @ b) - 1.4
        assert value == pytest.approx(expected)

    def test_dual_outside_domain(self):
        """Test that an unusable certificate gives -inf."""
        family = GLMFamily(FamilyKind.BERNOULLI)
        value = glm_dual_value(family, np.array([2.0]), 1.0, np.array([1.0]), 0.0)
        assert value == -math.inf

    def test_weak_duality(self):
        """Test Bernoulli dual values against primal values on a small instance."""
        rng = np.random.default_rng(21)
        A = rng.standard_normal((5, 8))
        b = rng.integers(0, 2, 5).astype(float)
        family = GLMFamily(FamilyKind.BERNOULLI)
        tau = 0.5
        primal = [
            glm_loss(family, b, A @ x)[0]
            for x in tau * rng.dirichlet(np.ones(8), 200)
        ]
        for y in rng.uniform(-1.0, 1.0, (50, 5)):
            y = np.where(b == 1, np.abs(y), -np.abs(y))
            polar = float(np.max(np.abs(A.T @ y)))
            dual = glm_dual_value(family, y, tau, b, polar)
            assert dual <= min(primal) + 1e-8


class TestDataFits:
    """Test cases for the loss classes consumed by the inner solvers."""

    def test_residual_fit_dual_term(self):
        """Test -L*(-y) for the least-squares residual fit."""
        b = np.array([1.0, 2.0])
        fit = ResidualFit(Misfit(MisfitKind.SUM_SQUARES), b)
        y = np.array([0.5, -1.0])
        assert fit.dual_term(y) == pytest.approx(float(b @ y) - 0.5 * float(y @ y))
        assert fit.curvature == 1.0

    def test_flipped_residual(self):
        """Test that flip evaluates rho on b - z."""
        misfit = Misfit(MisfitKind.QUANTILE_HUBER, kappa=0.2, q=0.9)
        b = np.array([1.0, -1.0])
        z = np.array([0.0, 0.5])
        value, grad = ResidualFit(misfit, b, flip=True).value_grad(z)
        expected, expected_grad = misfit_eval(misfit, b - z)
        assert value == expected
        np.testing.assert_array_equal(grad, -expected_grad)

    def test_norm2_rejected(self):
        """Test that the non-smooth 2-norm is not accepted as a loss."""
        with pytest.raises(DomainError, match="not smooth"):
            ResidualFit(Misfit(MisfitKind.NORM2), np.zeros(2))

    def test_glm_fit_offset(self):
        """Test that the offset shifts the predictor."""
        family = GLMFamily(FamilyKind.POISSON)
        b = np.array([1.0, 2.0])
        offset = np.array([0.5, -0.5])
        fit = GLMFit(family, b, offset)
        z = np.array([0.1, 0.2])
        assert fit.value(z) == pytest.approx(glm_loss(family, b, z + offset)[0])
        with pytest.raises(DomainError, match="offset shape"):
            GLMFit(family, b, np.zeros(3))

    def test_gamma_domain(self):
        """Test the Gamma predictor domain."""
        fit = GLMFit(GLMFamily(FamilyKind.GAMMA), np.array([1.0, 2.0]))
        assert fit.in_domain(np.array([-1.0, -0.5]))
        assert not fit.in_domain(np.array([-1.0, 0.0]))
