"""
Tests for the geometry module.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from errors import DomainError, InfeasibleError
from geometry import (
    ConicSlice,
    ElasticNetLevel,
    L1Ball,
    OrthantBudget,
    PolarKind,
    elastic_net_value,
    gauge_polar,
    minkowski_gauge,
    project_conic_slice,
    project_elastic_net,
    project_l1_ball,
    project_orthant_budget,
    support_elastic_net_level,
)


def assert_projection_optimal(z, x, feasible_points):
    """Check <z - x, w - x> <= 0 for feasible w."""
    for w in feasible_points:
        assert float((z - x) @ (w - x)) <= 1e-9


def elastic_net_boundary(w, alpha_en, tau):
    """Scale w onto the boundary of the elastic-net level set."""
    a = alpha_en * float(np.abs(w).sum())
    c = 0.5 * (1.0 - alpha_en) * float(w @ w)
    if c == 0:
        return w * (tau / a)
    s = (-a + math.sqrt(a * a + 4.0 * c * tau)) / (2.0 * c)
    return s * w


class TestProjectL1Ball:
    """Test cases for projection onto the l1 ball."""

    def test_axis(self):
        """Test an axis-aligned point."""
        np.testing.assert_allclose(project_l1_ball(np.array([3.0, 0.0]), 1.0), [1, 0])

    def test_symmetric(self):
        """Test a symmetric point."""
        x = project_l1_ball(np.array([1.0, 1.0]), 1.0)
        np.testing.assert_allclose(x, [0.5, 0.5])

    def test_inside_is_unchanged(self):
        """Test that points inside the ball are returned as copies."""
        z = np.array([0.2, -0.3])
        x = project_l1_ball(z, 1.0)
        np.testing.assert_array_equal(x, z)
        assert x is not z

    def test_matches_threshold_bisection(self):
        """Test random projections against a bisection on the threshold."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            z = rng.standard_normal(15)
            tau = float(rng.uniform(0.1, 0.9)) * float(np.abs(z).sum())
            theta = brentq(
                lambda t: float(np.maximum(np.abs(z) - t, 0).sum()) - tau,
                0.0,
                float(np.abs(z).max()),
                xtol=1e-14,
            )
            expected = np.sign(z) * np.maximum(np.abs(z) - theta, 0.0)
            np.testing.assert_allclose(project_l1_ball(z, tau), expected, atol=1e-8)

    def test_optimality_and_idempotence(self):
        """Test the variational inequality and idempotence."""
        rng = np.random.default_rng(1)
        z = 3.0 * rng.standard_normal(10)
        x = project_l1_ball(z, 2.0)
        points = 3.0 * rng.standard_normal((100, 10))
        feasible = [project_l1_ball(w, 2.0) for w in points]

        assert_projection_optimal(z, x, feasible)
        np.testing.assert_allclose(project_l1_ball(x, 2.0), x, atol=1e-12)

    def test_negative_tau(self):
        """Test that negative radii are rejected."""
        with pytest.raises(DomainError, match="non-negative"):
            project_l1_ball(np.ones(2), -1.0)


class TestProjectOrthantBudget:
    """Test cases for projection onto the budget set."""

    def test_budget_slack(self):
        """Test a point whose clipped version satisfies the budget."""
        x = project_orthant_budget(np.array([-1.0, 2.0]), np.ones(2), 5.0)
        np.testing.assert_allclose(x, [0.0, 2.0])

    def test_budget_active(self):
        """Test a point that violates the budget."""
        x = project_orthant_budget(np.array([2.0, 2.0]), np.ones(2), 2.0)
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-10)

    def test_zero_budget(self):
        """Test tau = 0."""
        x = project_orthant_budget(np.array([2.0, 2.0]), np.ones(2), 0.0)
        np.testing.assert_array_equal(x, [0.0, 0.0])

    def test_optimality(self):
        """Test the variational inequality with a weighted budget."""
        rng = np.random.default_rng(2)
        c_hat = rng.uniform(0.5, 2.0, 8)
        z = 2.0 * rng.standard_normal(8)
        x = project_orthant_budget(z, c_hat, 1.0)
        feasible = [
            w / max(1.0, float(c_hat @ w)) for w in rng.uniform(0.0, 1.0, (100, 8))
        ]

        assert float(c_hat @ x) <= 1.0 + 1e-10
        assert np.all(x >= 0)
        assert_projection_optimal(z, x, feasible)

    def test_non_positive_cost(self):
        """Test that c_hat must be strictly positive."""
        with pytest.raises(DomainError, match="c_hat"):
            project_orthant_budget(np.ones(2), np.array([1.0, 0.0]), 1.0)


class TestProjectConicSlice:
    """Test cases for projection onto a slice of the orthant."""

    def test_simplex_symmetry(self):
        """Test the simplex projection of a symmetric point."""
        x = project_conic_slice(np.array([0.4, 0.4]), np.ones(2), 1.0)
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-10)

    def test_vertex(self):
        """Test a point projecting onto a vertex."""
        x = project_conic_slice(np.array([2.0, 0.0]), np.ones(2), 1.0)
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-10)

    def test_point_on_slice(self):
        """Test that points on the slice are fixed."""
        z = np.array([0.25, 0.5, 0.25])
        np.testing.assert_allclose(project_conic_slice(z, np.ones(3), 1.0), z)

    def test_level_is_met(self):
        """Test that the equality holds to high accuracy on random points."""
        rng = np.random.default_rng(4)
        for _ in range(20):
            c = rng.uniform(0.1, 3.0, 12)
            x = project_conic_slice(rng.standard_normal(12), c, 2.0)
            assert float(c @ x) == pytest.approx(2.0, abs=1e-10)
            assert np.all(x >= 0)

    def test_errors(self):
        """Test the empty slice and unsupported cones."""
        with pytest.raises(InfeasibleError, match="empty"):
            project_conic_slice(np.ones(2), np.array([-1.0, -1.0]), 1.0)
        with pytest.raises(DomainError, match="orthant"):
            project_conic_slice(np.ones(2), np.ones(2), 1.0, cone="psd")


class TestElasticNet:
    """Test cases for the elastic-net projection and support function."""

    def test_l1_limit(self):
        """Test that alpha_en = 1 reduces to the l1 ball."""
        z = np.array([3.0, -1.0, 0.5])
        np.testing.assert_allclose(
            project_elastic_net(z, 1.0, 1.5), project_l1_ball(z, 1.5)
        )

    def test_l2_limit(self):
        """Test that alpha_en = 0 scales onto the l2 ball."""
        z = np.array([3.0, 4.0])
        x = project_elastic_net(z, 0.0, 2.0)
        np.testing.assert_allclose(x, z * (2.0 / 5.0))

    def test_mixed_projection(self):
        """Test level equality and optimality for alpha_en = 0.5."""
        rng = np.random.default_rng(6)
        for _ in range(5):
            z = 2.0 * rng.standard_normal(20)
            tau = 0.3 * elastic_net_value(z, 0.5)
            x = project_elastic_net(z, 0.5, tau)
            feasible = [
                t * elastic_net_boundary(w, 0.5, tau)
                for w, t in zip(rng.standard_normal((100, 20)), rng.uniform(0, 1, 100))
            ]

            assert elastic_net_value(x, 0.5) == pytest.approx(tau, rel=1e-9)
            assert_projection_optimal(z, x, feasible)
            np.testing.assert_allclose(project_elastic_net(x, 0.5, tau), x, atol=1e-12)

    def test_support_limits(self):
        """Test the zero vector and the l1 case."""
        assert support_elastic_net_level(np.zeros(3), 0.5, 1.0) == (0.0, 0.0)
        value, mu = support_elastic_net_level(np.array([1.0, -4.0]), 1.0, 2.0)
        assert value == 8.0
        assert mu == 4.0

    def test_support_matches_maximizer(self):
        """Test the support value against <z, x> at the far projection of z."""
        rng = np.random.default_rng(9)
        z = rng.standard_normal(10)
        value, _ = support_elastic_net_level(z, 0.4, 1.3)
        x = project_elastic_net(1e6 * z, 0.4, 1.3)
        assert value == pytest.approx(float(z @ x), rel=1e-5)

    def test_slope_matches_finite_differences(self):
        """Test the minimizing mu against d/dtau of the support value."""
        rng = np.random.default_rng(10)
        for _ in range(20):
            z = rng.standard_normal(8)
            alpha_en = float(rng.uniform(0.1, 0.9))
            tau = float(rng.uniform(0.2, 3.0))
            h = 1e-6 * tau
            _, mu = support_elastic_net_level(z, alpha_en, tau)
            upper, _ = support_elastic_net_level(z, alpha_en, tau + h)
            lower, _ = support_elastic_net_level(z, alpha_en, tau - h)
            assert mu == pytest.approx((upper - lower) / (2.0 * h), rel=1e-4)

    def test_support_is_concave_in_tau(self):
        """Test midpoint concavity on a grid of levels."""
        z = np.array([1.5, -0.2, 0.7, 0.0, -2.0])
        taus = np.linspace(0.1, 4.0, 30)
        values = [support_elastic_net_level(z, 0.6, t)[0] for t in taus]
        for i in range(len(taus) - 2):
            assert values[i + 1] >= 0.5 * (values[i] + values[i + 2]) - 1e-12

    def test_unbounded_slope(self):
        """Test that tau = 0 with alpha_en = 0 is rejected."""
        with pytest.raises(DomainError, match="unbounded"):
            support_elastic_net_level(np.ones(2), 0.0, 0.0)
        with pytest.raises(DomainError, match="alpha_en"):
            project_elastic_net(np.ones(2), 1.5, 1.0)


class TestGaugePolar:
    """Test cases for gauge polars."""

    def test_linf(self):
        """Test the polar of the l1 norm."""
        assert gauge_polar(PolarKind.LINF, np.array([1.0, -3.0])) == 3.0

    def test_nonneg_linear(self):
        """Test the polar of the nonnegative linear gauge."""
        c_hat = np.ones(2)
        assert gauge_polar(PolarKind.NONNEG_LINEAR, np.array([-2.0, -1.0]), c_hat) == 0
        weights = np.array([1.0, 2.0])
        value = gauge_polar(PolarKind.NONNEG_LINEAR, np.array([1.0, 3.0]), weights)
        assert value == 1.5
        with pytest.raises(DomainError, match="c_hat"):
            gauge_polar(PolarKind.NONNEG_LINEAR, np.ones(2))

    def test_minkowski_limits(self):
        """Test the l1 and vanishing cases of the sum polar."""
        z = np.array([0.5, -2.0, 1.0])
        assert gauge_polar(PolarKind.MINKOWSKI_SUM, z, alpha=1.0, beta=0.0) == 2.0
        assert gauge_polar(PolarKind.MINKOWSKI_SUM, z, alpha=1.0, beta=1e8) < 1e-7
        with pytest.raises(DomainError, match="not both zero"):
            gauge_polar(PolarKind.MINKOWSKI_SUM, z, alpha=0.0, beta=0.0)

    def test_minkowski_polar_inequality(self):
        """Test <x, z> <= gauge(x) * polar(z), with equality at the maximizer."""
        rng = np.random.default_rng(12)
        alpha, beta = 0.7, 0.4
        for _ in range(20):
            z = rng.standard_normal(6)
            polar = gauge_polar(PolarKind.MINKOWSKI_SUM, z, alpha=alpha, beta=beta)
            for x in rng.standard_normal((20, 6)):
                assert float(x @ z) <= minkowski_gauge(x, alpha, beta) * polar + 1e-9

            p = np.maximum(np.abs(z) - polar * alpha, 0.0)
            witness = np.sign(z) * p
            assert float(witness @ z) == pytest.approx(
                minkowski_gauge(witness, alpha, beta) * polar, rel=1e-8
            )


class TestConstraintSets:
    """Test cases for the constraint-set classes."""

    def test_l1_ball(self):
        """Test support, level and LMO of the l1 ball."""
        ball = L1Ball()
        assert ball.support(np.array([1.0, -3.0]), 2.0) == (6.0, 3.0)
        assert ball.level(np.array([1.0, -3.0])) == 4.0
        assert ball.has_lmo
        np.testing.assert_array_equal(ball.lmo(np.array([3.0, -5.0]), 2.0), [0, 2])

    def test_orthant_budget(self):
        """Test the budget set LMO and membership."""
        budget = OrthantBudget(np.array([1.0, 2.0]))
        np.testing.assert_array_equal(budget.lmo(np.array([1.0, -2.0]), 4.0), [0, 2])
        np.testing.assert_array_equal(budget.lmo(np.array([1.0, 2.0]), 4.0), [0, 0])
        assert budget.contains(np.array([1.0, 1.0]), 3.0)
        assert not budget.contains(np.array([-1.0, 1.0]), 3.0)
        assert budget.support(np.array([1.0, 4.0]), 3.0) == (6.0, 2.0)

    def test_elastic_net_level(self):
        """Test the elastic-net set wrapper."""
        level_set = ElasticNetLevel(0.5)
        assert not level_set.has_lmo
        assert level_set.level(np.array([2.0])) == 2.0
        with pytest.raises(NotImplementedError):
            level_set.lmo(np.ones(1), 1.0)

    def test_conic_slice(self):
        """Test the slice wrapper."""
        slice_set = ConicSlice(np.ones(2))
        np.testing.assert_array_equal(slice_set.project(np.ones(2), 0.0), [0, 0])
        assert slice_set.contains(np.array([0.5, 0.5]), 1.0)
        assert not slice_set.contains(np.array([0.5, 0.2]), 1.0)
        assert slice_set.support(np.array([1.0, 3.0]), 2.0) == (6.0, 3.0)
        with pytest.raises(DomainError, match="orthant"):
            ConicSlice(np.ones(2), cone="soc")
