import numpy as np
import pytest
from conftest import random_ball
from sampling import two_clusters

from hypcomm import geometry
from hypcomm.gaussian import SIGMA_MAX, GaussianComponent, mle, zeta_table
from hypcomm.mixture import (
    MixtureModel,
    e_step,
    em_fit,
    kmeans_fit,
    log_likelihood,
    m_step,
)


# The barycenter iteration stops once a step is <= eps, and each step covers about 2 * lr of the
# remaining gap, so an iterate is within eps / (2 lr) = 1e-3 of the exact barycenter
BARY_RESIDUAL = 1e-3


def exact_barycenter(points, weights=None):
    return geometry.weighted_barycenter(points, weights, eps=1e-12, max_iters=100_000)


def _hard(labels, K):
    w = np.zeros((len(labels), K))
    w[np.arange(len(labels)), labels] = 1.0
    return w


@pytest.fixture(scope="module")
def blobs():
    return two_clusters(400, 0.3, 2.5, np.random.default_rng(0))


class TestModel:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            MixtureModel([GaussianComponent(np.zeros(2), 0.5)], [0.5])

    def test_json_round_trip(self):
        rng = np.random.default_rng(1)
        comps = [GaussianComponent(p, s) for p, s in zip(random_ball(rng, 3, 4), (0.1, 0.2, 0.3))]
        model = MixtureModel(comps, [0.2, 0.3, 0.5])
        back = MixtureModel.from_json(model.to_json())
        np.testing.assert_array_equal(back.mus, model.mus)
        np.testing.assert_array_equal(back.sigmas, model.sigmas)
        np.testing.assert_array_equal(back.pi, model.pi)
        assert set(model.to_dict()) == {"dim", "K", "pi", "components"}


class TestEStep:
    def test_single_component(self):
        rng = np.random.default_rng(2)
        model = MixtureModel([GaussianComponent(np.zeros(2), 0.4)], [1.0])
        np.testing.assert_array_equal(e_step(random_ball(rng, 30, 2), model), 1.0)

    def test_point_at_separated_mean(self):
        mus = np.array([[-0.6, 0.0], [0.6, 0.0]])
        model = MixtureModel([GaussianComponent(m, 0.2) for m in mus], [0.5, 0.5])
        w = e_step(mus[:1], model)
        np.testing.assert_allclose(w[0], [1.0, 0.0], atol=1e-6)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            K = int(rng.integers(1, 5))
            comps = [GaussianComponent(p, s) for p, s in zip(random_ball(rng, K, 3), rng.uniform(0.05, 1.5, K))]
            model = MixtureModel(comps, rng.dirichlet(np.ones(K)))
            w = e_step(random_ball(rng, 50, 3), model)
            np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)

    def test_far_points_stay_finite(self):
        comps = [GaussianComponent(np.array([-0.5, 0.0]), 1e-3), GaussianComponent(np.array([0.5, 0.0]), 1e-3)]
        model = MixtureModel(comps, [0.5, 0.5])
        w = e_step(np.array([[0.0, 0.999999], [0.0, -0.999999]]), model)
        assert np.all(np.isfinite(w))
        np.testing.assert_allclose(w.sum(axis=1), 1.0)

    def test_underflowed_row_becomes_uniform(self, monkeypatch):
        from hypcomm import mixture

        monkeypatch.setattr(mixture, "_log_joint", lambda p, m, t: np.array([[-np.inf, -np.inf], [0.0, -1.0]]))
        model = MixtureModel([GaussianComponent(np.zeros(2), 0.5)] * 2, [0.5, 0.5])
        w = e_step(np.zeros((2, 2)), model)
        np.testing.assert_allclose(w[0], [0.5, 0.5])
        np.testing.assert_allclose(w[1].sum(), 1.0)


class TestMStep:
    def test_hard_assignment_gives_blob_barycenters(self, blobs):
        pts, labels, _ = blobs
        model = m_step(pts, _hard(labels, 2))
        for k in range(2):
            ref = geometry.weighted_barycenter(pts[labels == k])
            assert geometry.distance(model.mus[k], ref) < 1e-12
        np.testing.assert_allclose(model.pi, np.bincount(labels) / len(labels))

    def test_single_component_is_mle(self, blobs):
        pts = blobs[0]
        model = m_step(pts, np.ones((len(pts), 1)))
        ref = mle(pts)
        np.testing.assert_array_equal(model.pi, [1.0])
        np.testing.assert_allclose(model.mus[0], ref.mu, atol=1e-15)
        assert model.sigmas[0] == ref.sigma

    def test_pi_sums_to_one(self):
        rng = np.random.default_rng(4)
        pts = random_ball(rng, 40, 2)
        w = rng.dirichlet(np.ones(3), size=40)
        assert m_step(pts, w).pi.sum() == pytest.approx(1.0, abs=1e-12)

    def test_empty_component_is_reseeded(self, caplog):
        rng = np.random.default_rng(5)
        pts = random_ball(rng, 20, 2)
        w = np.c_[np.ones(20), np.zeros(20)]
        model = m_step(pts, w, rng=np.random.default_rng(0))
        assert model.sigmas[1] == pytest.approx(SIGMA_MAX)
        assert any(np.allclose(model.mus[1], p) for p in pts)
        assert model.pi.sum() == pytest.approx(1.0)
        assert "re-seeding" in caplog.text

    def test_hard_assignments_reproduced(self, blobs):
        pts, labels, _ = blobs
        w = e_step(pts, m_step(pts, _hard(labels, 2)))
        np.testing.assert_array_equal(w.argmax(axis=1), labels)


class TestEM:
    def test_recovers_two_clusters(self, blobs):
        pts, labels, _ = blobs
        fit = em_fit(pts, 2, seed=0)
        pred = fit.resp.argmax(axis=1)
        acc = max(np.mean(pred == labels), np.mean(pred != labels))
        assert acc >= 0.95
        assert fit.converged and fit.n_iter <= 200

    def test_loglik_monotone(self, blobs):
        fit = em_fit(blobs[0], 2, seed=3)
        assert np.all(np.diff(fit.loglik) >= -1e-6)
        assert fit.loglik[-1] == pytest.approx(log_likelihood(blobs[0], fit.model))

    def test_single_component_matches_mle(self, blobs):
        pts = blobs[0]
        fit = em_fit(pts, 1)
        ref = mle(pts)
        assert fit.n_iter == 1
        # the EM iteration warm-starts the barycenter, so both are within the solver residual
        assert geometry.distance(fit.model.mus[0], exact_barycenter(pts)) <= BARY_RESIDUAL
        assert geometry.distance(ref.mu, exact_barycenter(pts)) <= BARY_RESIDUAL
        assert fit.model.sigmas[0] == pytest.approx(ref.sigma, abs=1e-3)

    def test_warm_start_from_model(self, blobs):
        pts = blobs[0]
        first = em_fit(pts, 2, seed=0)
        again = em_fit(pts, 2, init=first.model)
        assert again.n_iter <= 2
        np.testing.assert_array_equal(again.resp.argmax(axis=1), first.resp.argmax(axis=1))

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            em_fit(np.zeros((2, 2)), 3)

    def test_uses_supplied_table(self, blobs):
        fit = em_fit(blobs[0], 2, table=zeta_table(2))
        assert fit.model.K == 2


class TestKMeans:
    def test_single_cluster(self, blobs):
        pts = blobs[0]
        fit = kmeans_fit(pts, 1)
        assert geometry.distance(fit.centroids[0], exact_barycenter(pts)) <= BARY_RESIDUAL
        assert np.all(fit.labels == 0)

    def test_recovers_two_blobs(self, blobs):
        pts, labels, _ = blobs
        pred = kmeans_fit(pts, 2, seed=1).labels
        acc = max(np.mean(pred == labels), np.mean(pred != labels))
        assert acc >= 0.95

    def test_perfect_on_far_blobs(self):
        rng = np.random.default_rng(6)
        pts, labels, _ = two_clusters(100, 0.1, 4.0, rng)
        pred = kmeans_fit(pts, 2, seed=0).labels
        assert np.all(pred == labels) or np.all(pred != labels)

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(7)
        pts = random_ball(rng, 200, 2)
        for seed in range(3):
            fit = kmeans_fit(pts, 4, seed=seed)
            assert np.all(np.diff(fit.objective) <= 1e-9)

    def test_empty_cluster_reseeded(self, caplog):
        pts = np.array([[0.0, 0.0], [0.01, 0.0], [0.5, 0.0]])
        init = np.array([[0.0, 0.0], [-0.9, 0.0]])
        fit = kmeans_fit(pts, 2, init=init)
        assert set(fit.labels.tolist()) == {0, 1}
        assert "empty" in caplog.text
