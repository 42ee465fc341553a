import mpmath
import numpy as np
import pytest
from conftest import random_ball

from hypcomm import geometry as G


class TestMobius:
    def test_right_identity(self):
        x = random_ball(np.random.default_rng(0), 50, 3)
        np.testing.assert_allclose(G.mobius_add(x, np.zeros_like(x)), x, atol=1e-12)

    def test_left_inverse(self):
        x = random_ball(np.random.default_rng(1), 50, 3)
        np.testing.assert_allclose(G.mobius_add(-x, x), 0.0, atol=1e-12)

    def test_closed_form_against_high_precision(self):
        x, y = np.array([0.5, 0.0]), np.array([0.0, 0.5])
        with mpmath.workdps(50):
            X, Y = mpmath.matrix([0.5, 0]), mpmath.matrix([0, 0.5])
            xy = (X.T * Y)[0]
            x2, y2 = (X.T * X)[0], (Y.T * Y)[0]
            num = (1 + 2 * xy + y2) * X + (1 - x2) * Y
            ref = num / (1 + 2 * xy + x2 * y2)
            ref_norm = mpmath.norm(ref)
            ref_d = 2 * mpmath.atanh(ref_norm)
        got = G.mobius_add(x, y)
        np.testing.assert_allclose(got, [float(ref[0]), float(ref[1])], atol=1e-15)
        assert G.distance(np.zeros(2), got) == pytest.approx(float(ref_d), rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(G.GeometryError):
            G.mobius_add(np.zeros(2), np.zeros(3))

    def test_non_finite_rejected(self):
        with pytest.raises(G.GeometryError):
            G.mobius_add(np.array([np.nan, 0.0]), np.zeros(2))


class TestDistance:
    def test_zero_on_diagonal(self):
        x = random_ball(np.random.default_rng(2), 20, 4)
        np.testing.assert_array_equal(G.distance(x, x), 0.0)

    def test_origin_to_half(self):
        with mpmath.workdps(40):
            ref = float(2 * mpmath.atanh(mpmath.mpf("0.5")))
        d = G.distance(np.zeros(2), np.array([0.5, 0.0]))
        assert d == pytest.approx(ref, abs=1e-12)
        assert d == pytest.approx(np.log(3), abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        x, y = random_ball(rng, 100, 2), random_ball(rng, 100, 2)
        np.testing.assert_array_equal(G.distance(x, y), G.distance(y, x))

    def test_points_projected_into_ball(self):
        x = G.as_point(np.array([3.0, 4.0]))
        assert np.linalg.norm(x) < 1


class TestExpLog:
    def test_exp_zero(self):
        x = np.array([0.3, -0.2])
        np.testing.assert_array_equal(G.exp_map(x, np.zeros(2)), x)

    def test_exp_at_origin(self):
        np.testing.assert_allclose(G.exp_map(np.zeros(2), np.array([0.5, 0.0])), [np.tanh(0.5), 0.0], atol=1e-15)

    def test_log_same_point(self):
        x = np.array([0.3, -0.2])
        np.testing.assert_array_equal(G.log_map(x, x), 0.0)

    def test_log_at_origin(self):
        y = np.array([0.5, 0.0])
        with mpmath.workdps(40):
            ref = float(mpmath.atanh(mpmath.mpf("0.5")))
        assert np.linalg.norm(G.log_map(np.zeros(2), y)) == pytest.approx(ref, abs=1e-14)
        assert G.distance(np.zeros(2), y) == pytest.approx(2 * ref, abs=1e-14)

    def test_log_exp_round_trip_small_v(self):
        rng = np.random.default_rng(4)
        x = random_ball(rng, 200, 3)
        v = 0.1 * rng.normal(size=(200, 3))
        np.testing.assert_allclose(G.log_map(x, G.exp_map(x, v)), v, atol=1e-9)

    def test_exp_log_round_trip(self):
        rng = np.random.default_rng(5)
        x, y = random_ball(rng, 200, 3), random_ball(rng, 200, 3)
        np.testing.assert_allclose(G.exp_map(x, G.log_map(x, y)), y, atol=1e-9)


class TestGradient:
    def test_zero_at_target(self):
        x = np.array([0.1, 0.4])
        np.testing.assert_array_equal(G.grad_sq_distance(x, x), 0.0)

    def test_at_origin(self):
        np.testing.assert_allclose(
            G.grad_sq_distance(np.zeros(2), np.array([0.5, 0.0])), [-2 * np.arctanh(0.5), 0.0], atol=1e-15
        )

    def test_directional_finite_difference(self):
        rng = np.random.default_rng(6)
        h = 1e-5
        for _ in range(50):
            x, y = random_ball(rng, 2, 3)
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            fd = (G.distance(G.exp_map(x, h * u), y) ** 2 - G.distance(G.exp_map(x, -h * u), y) ** 2) / (2 * h)
            an = G.inner(x, G.grad_sq_distance(x, y), u)
            assert abs(fd - an) <= 1e-5 * abs(an) + 1e-9


class TestRGD:
    def test_zero_gradient(self):
        x = np.array([0.3, 0.1])
        np.testing.assert_array_equal(G.rgd_step(x, np.zeros(2), 0.1), x)

    def test_boundary_skip(self):
        x = np.array([0.9, 0.0])
        np.testing.assert_array_equal(G.rgd_step(x, np.array([-1e6, 0.0]), 1.0), x)

    def test_minimizes_squared_distance(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            x, y = random_ball(rng, 2, 2)
            for it in range(500):
                x = G.rgd_step(x, G.grad_sq_distance(x, y), 0.05)
                if G.distance(x, y) < 1e-4:
                    break
            assert G.distance(x, y) < 1e-4

    def test_positive_learning_rate_required(self):
        with pytest.raises(G.GeometryError):
            G.rgd_step(np.zeros(2), np.ones(2), 0.0)


class TestBarycenter:
    def test_single_point(self):
        x = np.array([[0.2, -0.4]])
        np.testing.assert_allclose(G.weighted_barycenter(x), x[0], atol=1e-15)

    def test_antipodal_pair(self):
        x = np.array([[0.5, 0.2], [-0.5, -0.2]])
        assert G.distance(G.weighted_barycenter(x), np.zeros(2)) <= 1e-4

    def test_weights_match_duplication(self):
        rng = np.random.default_rng(8)
        x = random_ball(rng, 3, 2, 0.7)
        a = G.weighted_barycenter(x, np.array([1.0, 1.0, 2.0]))
        b = G.weighted_barycenter(np.vstack([x, x[2:]]))
        assert G.distance(a, b) <= 2e-4

    def test_scale_and_permutation_invariance(self):
        rng = np.random.default_rng(9)
        x = random_ball(rng, 6, 3, 0.7)
        w = rng.random(6)
        ref = G.weighted_barycenter(x, w)
        np.testing.assert_allclose(G.weighted_barycenter(x, 7.0 * w), ref, atol=1e-12)
        perm = rng.permutation(6)
        assert G.distance(G.weighted_barycenter(x[perm], w[perm]), ref) <= 1e-9

    def test_non_convergence_carries_last_iterate(self):
        x = np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.6]])
        with pytest.raises(G.ConvergenceError) as info:
            G.weighted_barycenter(x, max_iters=2)
        assert info.value.last.shape == (2,)

    def test_zero_weights_rejected(self):
        with pytest.raises(G.GeometryError):
            G.weighted_barycenter(np.zeros((2, 2)), np.zeros(2))
