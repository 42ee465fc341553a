"""Riemannian K-means and EM for Gaussian mixtures on the Poincaré ball."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import geometry
from .gaussian import GaussianComponent, estimate_sigma, zeta_table
from .geometry import ConvergenceError, weighted_barycenter

__all__ = [
    "ConvergenceError",
    "EMFit",
    "KMeansFit",
    "MixtureModel",
    "e_step",
    "em_fit",
    "kmeans_fit",
    "log_likelihood",
    "m_step",
    "weighted_barycenter",
]

log = logging.getLogger(__name__)

EMPTY_MASS = 1e-12


@dataclass
class MixtureModel:
    components: list
    pi: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        if len(self.components) < 1 or len(self.components) != len(self.pi):
            raise ValueError("need one weight per component and at least one component")
        if np.any(self.pi < 0) or abs(self.pi.sum() - 1) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")

    @property
    def K(self):
        return len(self.components)

    @property
    def dim(self):
        return self.components[0].mu.shape[-1]

    @property
    def mus(self):
        return np.stack([c.mu for c in self.components])

    @property
    def sigmas(self):
        return np.array([c.sigma for c in self.components])

    def to_dict(self):
        return {
            "dim": self.dim,
            "K": self.K,
            "pi": self.pi.tolist(),
            "components": [{"mu": c.mu.tolist(), "sigma": c.sigma} for c in self.components],
        }

    def to_json(self):
        # repr-based float formatting round-trips float64 exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc):
        comps = [GaussianComponent(np.array(c["mu"], dtype=np.float64), c["sigma"]) for c in doc["components"]]
        model = cls(comps, np.array(doc["pi"], dtype=np.float64))
        if model.K != doc["K"] or model.dim != doc["dim"]:
            raise ValueError("mixture document is inconsistent with its K/dim fields")
        return model

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _log_joint(points, model, table):
    """``log pi_k + log f(x_i | mu_k, sigma_k)`` as an N x K array."""
    d = geometry.distance(points[:, None, :], model.mus[None, :, :])
    sig = model.sigmas
    logz = np.array([table.log_zeta_at(s) for s in sig])
    with np.errstate(divide="ignore"):
        logpi = np.log(model.pi)
    return logpi - d**2 / (2 * sig**2) - logz


def log_likelihood(points, model, table=None):
    points = geometry.as_point(np.atleast_2d(points))
    table = table if table is not None else zeta_table(points.shape[1])
    return float(np.sum(logsumexp(_log_joint(points, model, table), axis=1)))


def e_step(points, model, table=None):
    """Posterior responsibilities ``w_ik``, normalized over components."""
    points = geometry.as_point(np.atleast_2d(points))
    table = table if table is not None else zeta_table(points.shape[1])
    lj = _log_joint(points, model, table)
    norm = logsumexp(lj, axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        w = np.exp(lj - norm)
    bad = ~np.isfinite(norm[:, 0])
    if np.any(bad):
        w[bad] = 1.0 / model.K
    return w


def m_step(points, w, table=None, init=None, rng=None):
    """Update (pi, mu, sigma) from responsibilities.

    ``init`` is an optional previous model whose means warm-start the
    barycenter iterations. A component with no mass is re-seeded at a random
    data point with the largest sigma on the grid.
    """
    points = geometry.as_point(np.atleast_2d(points))
    w = np.asarray(w, dtype=np.float64)
    n, m = points.shape
    if w.shape[0] != n:
        raise ValueError("responsibilities must have one row per point")
    table = table if table is not None else zeta_table(m)
    rng = rng if rng is not None else np.random.default_rng(0)
    mass = w.sum(axis=0)
    pi = mass / n
    comps = []
    for k in range(w.shape[1]):
        if mass[k] < EMPTY_MASS:
            log.warning("component %d lost all mass; re-seeding", k)
            comps.append(GaussianComponent(points[rng.integers(n)], table.sigmas[-1]))
            pi[k] = 1.0 / n
            continue
        start = init.components[k].mu if init is not None else None
        mu = weighted_barycenter(points, w[:, k], init=start)
        sigma = estimate_sigma(geometry.distance(points, mu) ** 2, w[:, k], table)
        comps.append(GaussianComponent(mu, sigma))
    return MixtureModel(comps, pi / pi.sum())


def kmeanspp_seeds(points, K, rng):
    """K-means++ seeding with squared hyperbolic distances."""
    n = len(points)
    idx = [int(rng.integers(n))]
    d2 = geometry.distance(points, points[idx[0]]) ** 2
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, geometry.distance(points, points[nxt]) ** 2)
    return points[idx]


def _hard(labels, K):
    w = np.zeros((len(labels), K))
    w[np.arange(len(labels)), labels] = 1.0
    return w


def _nearest(points, centers):
    d = geometry.distance(points[:, None, :], centers[None, :, :])
    return np.argmin(d, axis=1), d


@dataclass
class EMFit:
    model: MixtureModel
    resp: np.ndarray
    loglik: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def initial_model(points, K, rng, table, init="kmeans++"):
    if isinstance(init, MixtureModel):
        return init
    if init == "kmeans++":
        seeds = kmeanspp_seeds(points, K, rng)
    elif init == "random":
        seeds = points[rng.choice(len(points), size=K, replace=False)]
    else:
        raise ValueError(f"unknown init policy {init!r}")
    labels, _ = _nearest(points, seeds)
    return m_step(points, _hard(labels, K), table, rng=rng)


def em_fit(points, K, init="kmeans++", max_iters=200, tol=1e-4, seed=0, table=None):
    """Fit a K-component Riemannian GMM by alternating E and M steps.

    Stops once the mean absolute change of the responsibilities drops
    below ``tol``.
    """
    points = geometry.as_point(np.atleast_2d(points))
    n, m = points.shape
    if K < 1 or n < K:
        raise ValueError(f"need 1 <= K <= N (K={K}, N={n})")
    table = table if table is not None else zeta_table(m)
    rng = np.random.default_rng(seed)
    model = initial_model(points, K, rng, table, init)
    w = e_step(points, model, table)
    fit = EMFit(model, w, [log_likelihood(points, model, table)])
    for it in range(1, max_iters + 1):
        model = m_step(points, w, table, init=model, rng=rng)
        w_new = e_step(points, model, table)
        fit.loglik.append(log_likelihood(points, model, table))
        delta = np.mean(np.abs(w_new - w))
        w = w_new
        fit.model, fit.resp, fit.n_iter = model, w, it
        if delta < tol:
            fit.converged = True
            break
    return fit


@dataclass
class KMeansFit:
    centroids: np.ndarray
    labels: np.ndarray
    objective: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def kmeans_fit(points, K, init="kmeans++", max_iters=200, seed=0):
    """Lloyd iterations with hyperbolic distance and Riemannian barycenters."""
    points = geometry.as_point(np.atleast_2d(points))
    n = len(points)
    if K < 1 or n < K:
        raise ValueError(f"need 1 <= K <= N (K={K}, N={n})")
    rng = np.random.default_rng(seed)
    if isinstance(init, np.ndarray):
        centroids = geometry.as_point(init).copy()
    elif init == "kmeans++":
        centroids = kmeanspp_seeds(points, K, rng)
    elif init == "random":
        centroids = points[rng.choice(n, size=K, replace=False)]
    else:
        raise ValueError(f"unknown init policy {init!r}")
    labels, d = _nearest(points, centroids)
    fit = KMeansFit(centroids, labels)
    for it in range(1, max_iters + 1):
        for k in range(K):
            members = labels == k
            if not members.any():
                own = d[np.arange(n), labels]
                far = int(np.argmax(own))
                log.warning("cluster %d empty; re-seeding at point %d", k, far)
                centroids[k] = points[far]
                labels[far] = k
                d[far] = geometry.distance(points[far], centroids)
                continue
            centroids[k] = weighted_barycenter(points[members], init=centroids[k])
        fit.objective.append(float(np.sum(geometry.distance(points, centroids[labels]) ** 2)))
        new_labels, d = _nearest(points, centroids)
        fit.centroids, fit.n_iter = centroids, it
        if np.array_equal(new_labels, labels):
            fit.converged = True
            break
        labels = new_labels
        fit.labels = labels
    fit.labels = labels
    return fit
