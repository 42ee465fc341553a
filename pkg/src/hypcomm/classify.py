"""Supervised community prediction on ball embeddings.

Four predictors share one shape: ``fit`` on (points, label matrix) and
``rank(points, n)`` returning the ``n`` best community ids per row, best
first, ties going to the smaller id.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from . import geometry
from .gaussian import DegenerateClusterError, zeta_table
from .mixture import MixtureModel, _log_joint, m_step

log = logging.getLogger(__name__)

__all__ = [
    "GMMClassifier",
    "HLRClassifier",
    "Hyperplane",
    "MCCBaseline",
    "NearestBarycenter",
    "TrainingError",
    "as_label_matrix",
    "hlr_fit",
    "hyperplane_distance",
    "hyperplane_score",
    "mcc_baseline",
    "supervised_gmm_fit",
    "supervised_gmm_predict",
    "supervised_kmeans",
    "top_n",
]


class TrainingError(RuntimeError):
    pass


def as_label_matrix(labels, n_classes=None):
    """Accept an N x K binary matrix or a vector of class ids."""
    labels = np.asarray(labels)
    if labels.ndim == 1:
        k = int(labels.max()) + 1 if n_classes is None else n_classes
        y = np.zeros((len(labels), k), dtype=np.int8)
        y[np.arange(len(labels)), labels] = 1
        return y
    if labels.ndim != 2:
        raise ValueError("labels must be a vector of ids or an N x K matrix")
    return (labels != 0).astype(np.int8)


def top_n(scores, n):
    """Column ids of the ``n`` largest scores per row; equal scores keep id order."""
    scores = np.atleast_2d(scores)
    n = min(n, scores.shape[1])
    return np.argsort(-scores, axis=1, kind="stable")[:, :n]


def _check_cover(y):
    empty = np.flatnonzero(y.sum(axis=0) == 0)
    if empty.size:
        raise DegenerateClusterError(f"communities without training members: {empty.tolist()}")


class NearestBarycenter:
    """One Riemannian barycenter per community; predict by hyperbolic distance."""

    kind = "kmeans"

    def __init__(self, centroids=None):
        self.centroids = centroids

    def fit(self, points, labels):
        points = geometry.as_point(np.atleast_2d(points))
        y = as_label_matrix(labels)
        _check_cover(y)
        # multi-label members count toward every community they belong to
        self.centroids = np.stack([geometry.weighted_barycenter(points[y[:, k] > 0]) for k in range(y.shape[1])])
        return self

    def scores(self, points):
        points = geometry.as_point(np.atleast_2d(points))
        return -geometry.distance(points[:, None, :], self.centroids[None, :, :])

    def rank(self, points, n=1):
        return top_n(self.scores(points), n)

    def to_dict(self):
        return {"kind": self.kind, "centroids": self.centroids.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array(doc["centroids"], dtype=np.float64))


def supervised_kmeans(points, labels, query, n=1):
    """Communities of the ``n`` barycenters nearest to each query point."""
    return NearestBarycenter().fit(points, labels).rank(query, n)


class GMMClassifier:
    """A single M-step from normalized label weights, then Bayes' rule."""

    kind = "gmm"

    def __init__(self, model=None):
        self.model = model

    def fit(self, points, labels, table=None):
        self.model = supervised_gmm_fit(points, labels, table)
        return self

    def scores(self, points, priors=None):
        points = geometry.as_point(np.atleast_2d(points))
        model = self.model
        if priors is not None:
            model = MixtureModel(model.components, np.asarray(priors, dtype=np.float64))
        return _log_joint(points, model, zeta_table(model.dim))

    def rank(self, points, n=1, priors=None):
        return top_n(self.scores(points, priors), n)

    def to_dict(self):
        return {"kind": self.kind, "mixture": self.model.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        return cls(MixtureModel.from_dict(doc["mixture"]))


def supervised_gmm_fit(points, labels, table=None):
    points = geometry.as_point(np.atleast_2d(points))
    y = as_label_matrix(labels).astype(np.float64)
    _check_cover(y)
    rows = y.sum(axis=1)
    keep = rows > 0
    w = y[keep] / rows[keep, None]
    return m_step(points[keep], w, table)


def supervised_gmm_predict(model, points, n=1, priors=None):
    """Rank communities by ``pi_k f(x | mu_k, sigma_k)``; ``priors`` overrides ``model.pi``."""
    return GMMClassifier(model).rank(points, n, priors)


@dataclass
class Hyperplane:
    """Geodesic hyperplane through ``p`` orthogonal to the tangent vector ``a``."""

    p: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.p = geometry.as_point(self.p)
        self.a = np.asarray(self.a, dtype=np.float64)
        if not np.linalg.norm(self.a) > 0:
            raise ValueError("hyperplane normal must be nonzero")

    def to_dict(self):
        return {"p": self.p.tolist(), "a": self.a.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array(doc["p"]), np.array(doc["a"]))


def _hyper_arg(x, p, a):
    u = geometry._mobius_add(-p, x)
    return 2 * (u @ a) / ((1 - np.sum(u * u, axis=-1)) * np.linalg.norm(a))


def hyperplane_distance(x, h):
    """``asinh(2 |<-p (+) x, a>| / ((1 - |-p (+) x|^2) |a|))``."""
    x = geometry.as_point(x)
    return np.arcsinh(np.abs(_hyper_arg(x, h.p, h.a)))


def hyperplane_score(x, h):
    """Signed distance ``sign(<-p (+) x, a>) d(x, H)``, positive on the side ``a`` points to."""
    x = geometry.as_point(x)
    return np.arcsinh(_hyper_arg(x, h.p, h.a))


def _hlr_loss_grad(x, t, p, a):
    """Mean cross-entropy of ``sigmoid(score)`` against targets ``t`` and its Euclidean gradients."""
    q = -p
    xq = x @ q
    x2 = np.sum(x * x, axis=1)
    q2 = q @ q
    A = 1 + 2 * xq + x2
    B = 1 - q2
    D = 1 + 2 * xq + q2 * x2
    N = A[:, None] * q + B * x
    u = N / D[:, None]
    u2 = np.sum(u * u, axis=1)
    an = np.linalg.norm(a)
    ua = u @ a
    c = 1 - u2
    z = 2 * ua / (c * an)
    s = np.arcsinh(z)
    loss = -np.mean(t * log_expit(s) + (1 - t) * log_expit(-s))
    gs = (expit(s) - t) / len(t)
    gz = gs / np.sqrt(1 + z * z)
    grad_a = (gz * 2 / c) @ (u / an - np.outer(ua, a) / an**3)
    gu = (gz * 2 / an)[:, None] * (a[None, :] / c[:, None] + (2 * ua / c**2)[:, None] * u)
    # vector-Jacobian product of (q, x) -> q (+) x with respect to q
    ug = np.sum(gu * u, axis=1)
    jq = (
        A[:, None] * gu
        + 2 * x * (gu @ q)[:, None]
        - 2 * np.outer(np.sum(x * gu, axis=1), q)
    ) / D[:, None] - (ug / D)[:, None] * (2 * x + 2 * x2[:, None] * q)
    grad_p = -jq.sum(axis=0)
    return loss, grad_p, grad_a


def _fit_hyperplane(x, t, lr, epochs):
    pos, neg = x[t > 0], x[t == 0]
    p = geometry.weighted_barycenter(pos)
    if len(neg):
        v = -geometry.log_map(p, geometry.weighted_barycenter(neg))
    else:
        v = -p
    if not np.linalg.norm(v) > 0:
        v = np.eye(x.shape[1])[0]
    a = v / np.linalg.norm(v)
    for _ in range(epochs):
        loss, gp, ga = _hlr_loss_grad(x, t, p, a)
        if not np.isfinite(loss):
            raise TrainingError("hyperbolic logistic regression produced a non-finite loss")
        rg = (1 - p @ p) ** 2 / 4 * gp
        p = geometry.rgd_step(p, rg, lr)
        a_new = a - lr * ga
        if np.linalg.norm(a_new) > 0:
            a = a_new
    return Hyperplane(p, a)


class HLRClassifier:
    """One-vs-rest hyperbolic logistic regression."""

    kind = "hlr"

    def __init__(self, planes=None, lr=0.1, epochs=300):
        self.planes = planes
        self.lr = lr
        self.epochs = epochs

    def fit(self, points, labels):
        points = geometry.as_point(np.atleast_2d(points))
        y = as_label_matrix(labels)
        _check_cover(y)
        self.planes = [_fit_hyperplane(points, y[:, k].astype(np.float64), self.lr, self.epochs) for k in range(y.shape[1])]
        return self

    def scores(self, points):
        points = geometry.as_point(np.atleast_2d(points))
        return np.stack([hyperplane_score(points, h) for h in self.planes], axis=1)

    def proba(self, points):
        return expit(self.scores(points))

    def rank(self, points, n=1):
        return top_n(self.scores(points), n)

    def to_dict(self):
        return {"kind": self.kind, "lr": self.lr, "epochs": self.epochs, "planes": [h.to_dict() for h in self.planes]}

    @classmethod
    def from_dict(cls, doc):
        return cls([Hyperplane.from_dict(h) for h in doc["planes"]], doc.get("lr", 0.1), doc.get("epochs", 300))


def hlr_fit(points, labels, lr=0.1, epochs=300):
    return HLRClassifier(lr=lr, epochs=epochs).fit(points, labels).planes


class MCCBaseline:
    """Most common community: predicts from the label frequencies alone.

    Deterministic top-n by default; ``sample=True`` draws each node's
    communities from the frequency vector instead.
    """

    kind = "mcc"

    def __init__(self, freqs=None, sample=False, seed=0):
        self.freqs = freqs
        self.sample = sample
        self.seed = seed

    def fit(self, points, labels):
        y = as_label_matrix(labels).astype(np.float64)
        total = y.sum()
        if not total > 0:
            raise ValueError("MCC needs at least one training label")
        self.freqs = y.sum(axis=0) / total
        return self

    def scores(self, points):
        n = len(np.atleast_2d(points))
        return np.broadcast_to(self.freqs, (n, len(self.freqs)))

    def rank(self, points, n=1):
        if not self.sample:
            return top_n(self.scores(points), n)
        rng = np.random.default_rng(self.seed)
        rows = len(np.atleast_2d(points))
        k = min(n, np.count_nonzero(self.freqs))
        return np.array([rng.choice(len(self.freqs), size=k, replace=False, p=self.freqs) for _ in range(rows)])

    def to_dict(self):
        return {"kind": self.kind, "freqs": self.freqs.tolist(), "sample": self.sample, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array(doc["freqs"]), doc.get("sample", False), doc.get("seed", 0))


def mcc_baseline(labels_train, n=1):
    """The ``n`` most frequent communities of the training labels."""
    return MCCBaseline().fit(None, labels_train).rank(np.zeros((1, 1)), n)[0]


CLASSIFIERS = {c.kind: c for c in (NearestBarycenter, GMMClassifier, HLRClassifier, MCCBaseline)}


def make_classifier(kind, **kwargs):
    try:
        return CLASSIFIERS[kind](**kwargs)
    except KeyError:
        raise ValueError(f"unknown method {kind!r}; choose from {sorted(CLASSIFIERS)}") from None


def classifier_to_json(clf):
    return json.dumps(clf.to_dict(), indent=2)


def classifier_from_json(text):
    doc = json.loads(text)
    return CLASSIFIERS[doc["kind"]].from_dict(doc)


def cross_validate(points, labels, method="kmeans", folds=5, topn=(1,), seed=0, **kwargs):
    """k-fold Precision@n for one classifier; each fold refits on its training split."""
    from .metrics import MetricsReport, kfold, precision_at_n

    points = geometry.as_point(np.atleast_2d(points))
    y = as_label_matrix(labels)
    report = MetricsReport()
    for train, val in kfold(len(points), folds, seed, labels=y):
        clf = make_classifier(method, **kwargs).fit(points[train], y[train])
        ranked = clf.rank(points[val], max(topn))
        for n in topn:
            report.add(f"Precision@{n}", precision_at_n(ranked[:, :n], y[val]))
    return report
