import math

import numpy as np
import pytest

from entroflow import (
    AtEquilibriumError,
    FamilyManifold,
    MetricTensor,
    ReparametrizedManifold,
    SingularModelError,
    StepTooLargeError,
    as_manifold,
    christoffel,
    covariant_acceleration,
    entropy_gradient,
    fd_metric_oracle,
    field_strength,
    metric,
    sigma,
    solve_lambda,
    velocity_field,
)
from helpers import random_tabulated, random_feasible_mean


def bernoulli_metric(A):
    return 1.0 / (A * (1.0 - A))


class TestMetricTensor:
    def test_from_matrix_invariants(self, rng):
        for _ in range(10):
            m = rng.normal(size=(3, 3))
            g = MetricTensor.from_matrix(m @ m.T + 3.0 * np.eye(3))
            assert np.array_equal(g.g, g.g.T)
            assert np.array_equal(g.g_inv, g.g_inv.T)
            assert np.max(np.abs(g.g @ g.g_inv - np.eye(3))) <= 1e-10
            assert np.max(np.abs(g.chol @ g.chol.T - g.g)) <= 1e-12 * np.max(np.abs(g.g))

    def test_rejects_indefinite(self):
        with pytest.raises(SingularModelError):
            MetricTensor.from_matrix([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(SingularModelError):
            MetricTensor.from_matrix([[0.0]])


class TestMetric:
    def test_bernoulli_values(self, bernoulli):
        assert metric(bernoulli, [0.5]).g[0, 0] == pytest.approx(4.0, rel=1e-12)
        assert metric(bernoulli, [0.25]).g[0, 0] == pytest.approx(
            bernoulli_metric(0.25), rel=1e-12
        )

    def test_gaussian_flat(self, gaussian, rng):
        for _ in range(5):
            assert metric(gaussian, rng.normal(size=1)).g[0, 0] == pytest.approx(
                1.0, rel=1e-12
            )

    def test_duality_with_covariance(self, bernoulli, ideal_gas, rng):
        for fam, A in [
            (bernoulli, np.array([0.3])),
            (ideal_gas, np.array([2.0, 1.5])),
        ]:
            g = metric(fam, A).g
            cov = fam.covariance(solve_lambda(fam, A))
            assert np.max(np.abs(g @ cov - np.eye(fam.n_dim))) <= 1e-9

    def test_matches_fd_oracle_bernoulli_example(self, bernoulli):
        oracle = fd_metric_oracle(bernoulli, [0.5], step=1e-4)
        assert oracle[0, 0] == pytest.approx(4.0, rel=1e-5)

    def test_matches_fd_oracle_gaussian_example(self, gaussian):
        oracle = fd_metric_oracle(gaussian, [0.0], step=1e-4)
        assert oracle[0, 0] == pytest.approx(1.0, rel=1e-5)

    def test_matches_fd_oracle_ideal_gas_example(self, ideal_gas):
        # V=2, (E, N) = (3, 2)
        oracle = fd_metric_oracle(ideal_gas, [3.0, 2.0], step=1e-5)
        analytic = ideal_gas.neg_entropy_hessian([3.0, 2.0])
        assert np.max(np.abs(oracle - analytic)) <= 1e-4 * np.max(np.abs(analytic))

    def test_oracle_agreement_50_random_points(
        self, bernoulli, gaussian2, ideal_gas, rng
    ):
        for _ in range(50):
            A = np.array([rng.uniform(0.1, 0.9)])
            g = metric(bernoulli, A).g
            assert np.max(np.abs(g - fd_metric_oracle(bernoulli, A))) <= 1e-5 * np.max(
                np.abs(g)
            )
        for _ in range(50):
            A = rng.uniform(-2.0, 2.0, 2)
            g = metric(gaussian2, A).g
            assert np.max(np.abs(g - fd_metric_oracle(gaussian2, A))) <= 1e-5
        for _ in range(50):
            A = np.array([rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0)])
            g = metric(ideal_gas, A).g
            assert np.max(
                np.abs(g - fd_metric_oracle(ideal_gas, A, step=1e-5))
            ) <= 1e-5 * np.max(np.abs(g))

    def test_oracle_agreement_tabulated(self, rng):
        fam = random_tabulated(rng, n_dim=2, n_points=6)
        for _ in range(20):
            A = random_feasible_mean(rng, fam)
            g = metric(fam, A).g
            assert np.max(np.abs(g - fd_metric_oracle(fam, A))) <= 1e-5 * np.max(
                np.abs(g)
            )


class TestSigma:
    def test_vanishes_at_maximum(self, bernoulli, gaussian):
        assert sigma(bernoulli, [0.5]) <= 1e-12
        assert sigma(gaussian, [0.0]) <= 1e-12

    def test_bernoulli_derived_value(self, bernoulli):
        expected = math.log(3.0) * math.sqrt(0.25 * 0.75)
        assert sigma(bernoulli, [0.25]) == pytest.approx(expected, rel=1e-12)

    def test_gaussian_derived_value(self, gaussian):
        assert sigma(gaussian, [-2.0]) == pytest.approx(2.0, rel=1e-12)

    def test_zero_iff_gradient_zero(self, bernoulli, rng):
        for _ in range(20):
            A = np.array([rng.uniform(0.05, 0.95)])
            s = sigma(bernoulli, A)
            grad = entropy_gradient(bernoulli, A)
            assert (s <= 1e-12) == (np.max(np.abs(grad)) <= 1e-12)


class TestChristoffel:
    def test_bernoulli_symmetric_point(self, bernoulli):
        assert abs(christoffel(bernoulli, [0.5]).gamma[0, 0, 0]) <= 1e-6

    def test_bernoulli_analytic(self, bernoulli):
        # 1-D Levi-Civita: (1/2) g^-1 dg/dA = (2A - 1) / (2 A (1 - A))
        got = christoffel(bernoulli, [0.25]).gamma[0, 0, 0]
        expected = (2 * 0.25 - 1.0) / (2 * 0.25 * 0.75)
        assert got == pytest.approx(expected, rel=1e-6)
        assert got == pytest.approx(-4.0 / 3.0, rel=1e-6)

    def test_gaussian_flat(self, gaussian2, rng):
        gam = christoffel(gaussian2, rng.normal(size=2)).gamma
        assert np.max(np.abs(gam)) <= 1e-10

    def test_exact_lower_symmetry(self, equal_gas_pair):
        gam = christoffel(equal_gas_pair, [1.3, 0.8]).gamma
        assert np.array_equal(gam, gam.transpose(0, 2, 1))

    def test_metric_compatibility(self, ideal_gas, rng):
        # covariant derivative of g vanishes: d_c g_ab = Gamma^d_ca g_db + Gamma^d_cb g_ad
        for _ in range(5):
            A = np.array([rng.uniform(1.0, 4.0), rng.uniform(0.8, 2.5)])
            m = as_manifold(ideal_gas)
            gam = christoffel(ideal_gas, A).gamma
            g = metric(ideal_gas, A).g
            step = 1e-5
            for c in range(2):
                h = step * (abs(A[c]) + 1.0)
                xp = A.copy()
                xp[c] += h
                xm = A.copy()
                xm[c] -= h
                dg = (m.metric_matrix(xp) - m.metric_matrix(xm)) / (2.0 * h)
                predicted = np.einsum("da,db->ab", gam[:, c, :], g) + np.einsum(
                    "db,ad->ab", gam[:, c, :], g
                )
                assert np.max(np.abs(dg - predicted)) <= 5e-4

    def test_step_too_large_near_boundary(self, bernoulli):
        with pytest.raises(StepTooLargeError):
            christoffel(bernoulli, [1.0 - 1e-9])


class TestCovariantAcceleration:
    def test_one_dimensional_flows_are_geodesic(self, bernoulli, gaussian):
        for fam, pts in [(bernoulli, [0.2, 0.35, 0.7]), (gaussian, [-1.5, 0.4, 2.0])]:
            for a in pts:
                acc = covariant_acceleration(fam, [a])
                assert np.max(np.abs(acc)) <= 1e-8

    def test_flat_product_family_is_geodesic(self, gaussian2):
        acc = covariant_acceleration(gaussian2, [-1.0, 0.7])
        assert np.max(np.abs(acc)) <= 1e-8

    def test_coupled_gas_nonzero_and_orthogonal(self, equal_gas_pair):
        A = np.array([1.1, 0.6])
        acc = covariant_acceleration(equal_gas_pair, A)
        assert np.linalg.norm(acc) > 1e-3
        pt = as_manifold(equal_gas_pair).point(A)
        v = velocity_field(equal_gas_pair, A)
        inner = acc @ pt.metric.g @ v
        assert abs(inner) <= 1e-6 * max(1.0, np.linalg.norm(acc))

    def test_accepts_explicit_velocity(self, bernoulli):
        v = velocity_field(bernoulli, [0.3])
        acc = covariant_acceleration(bernoulli, [0.3], A_dot=v)
        assert np.max(np.abs(acc)) <= 1e-8


class TestFieldStrength:
    def test_one_dimensional_is_zero(self, bernoulli):
        f = field_strength(bernoulli, [0.25])
        assert f.shape == (1, 1)
        assert f[0, 0] == 0.0

    def test_antisymmetry_exact(self, equal_gas_pair, ideal_gas):
        for system, A in [
            (equal_gas_pair, np.array([1.2, 0.7])),
            (ideal_gas, np.array([2.0, 1.2])),
        ]:
            f = field_strength(system, A)
            assert np.max(np.abs(f + f.T)) == 0.0

    def test_velocity_norm_preserved(self, equal_gas_pair):
        A = np.array([1.2, 0.7])
        f = field_strength(equal_gas_pair, A)
        v = velocity_field(equal_gas_pair, A)
        assert abs(v @ f @ v) <= 1e-6

    def test_acceleration_identity(self, equal_gas_pair):
        # D v / dtau = g_inv . f . v along the flow
        for A in ([1.1, 0.6], [1.5, 0.8], [0.9, 0.55]):
            A = np.array(A)
            pt = as_manifold(equal_gas_pair).point(A)
            v = velocity_field(equal_gas_pair, A)
            lhs = covariant_acceleration(equal_gas_pair, A)
            rhs = pt.metric.g_inv @ field_strength(equal_gas_pair, A) @ v
            assert np.max(np.abs(lhs - rhs)) <= 1e-4

    def test_rejected_near_equilibrium(self, equal_gas_pair):
        with pytest.raises(AtEquilibriumError):
            field_strength(equal_gas_pair, [2.0, 1.0])


class TestTensorTransformation:
    def test_bernoulli_quadratic_chart(self, bernoulli):
        # B = A^2 on (0, 1); the direct Fisher information in the B chart
        # must equal the tensor transform of the A-chart metric.
        for a in (0.3, 0.5, 0.7):
            b_coord = a * a
            jac = 2.0 * a
            transformed = metric(bernoulli, [a]).g[0, 0] / jac**2

            def log_p1(b):
                return 0.5 * math.log(b)

            def log_p0(b):
                return math.log(1.0 - math.sqrt(b))

            h = 1e-6
            d1 = (log_p1(b_coord + h) - log_p1(b_coord - h)) / (2 * h)
            d0 = (log_p0(b_coord + h) - log_p0(b_coord - h)) / (2 * h)
            fisher = a * d1**2 + (1.0 - a) * d0**2
            assert transformed == pytest.approx(fisher, rel=1e-6)

    def test_reparametrized_manifold_agrees(self, bernoulli):
        rep = ReparametrizedManifold(
            FamilyManifold(bernoulli),
            forward=lambda A: A**2,
            inverse=lambda B: np.sqrt(B),
            jacobian=lambda A: np.array([[2.0 * A[0]]]),
        )
        for a in (0.25, 0.6):
            direct = rep.metric_matrix([a * a])[0, 0]
            expected = bernoulli_metric(a) / (2.0 * a) ** 2
            assert direct == pytest.approx(expected, rel=1e-12)
            # sigma is a scalar invariant of the chart
            assert rep.point(np.array([a * a])).sigma == pytest.approx(
                sigma(bernoulli, [a]), rel=1e-10
            )
