"""Clustering and classification scores, and the k-fold harness."""

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

EXHAUSTIVE_MAX_K = 8


class MatchingError(ValueError):
    pass


@dataclass
class Conductance:
    value: float
    per_cluster: np.ndarray
    degenerate: tuple = ()


def conductance(g, assign, K=None):
    """Mean over clusters of ``cut(C) / min(vol(C), vol(V \\ C))``.

    Clusters with a zero denominator (empty, or holding every edge) count
    as 0 and are listed in ``degenerate``.
    """
    assign = np.asarray(assign, dtype=np.int64)
    if assign.shape != (g.n_nodes,):
        raise ValueError("need one cluster id per node")
    K = int(assign.max()) + 1 if K is None else K
    deg = g.degrees.astype(np.float64)
    vol = np.bincount(assign, weights=deg, minlength=K)
    e0, e1 = assign[g.edges[:, 0]], assign[g.edges[:, 1]]
    crossing = e0 != e1
    cut = np.bincount(e0[crossing], minlength=K) + np.bincount(e1[crossing], minlength=K)
    total = deg.sum()
    den = np.minimum(vol, total - vol)
    per = np.zeros(K)
    ok = den > 0
    per[ok] = cut[ok] / den[ok]
    bad = tuple(int(k) for k in np.flatnonzero(~ok))
    if bad:
        log.warning("conductance undefined for clusters %s; counted as 0", list(bad))
    return Conductance(float(per.mean()), per, bad)


def _contingency(pred, truth):
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be equal-length id vectors")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1))
    np.add.at(table, (p, t), 1)
    return table


def nmi(pred, truth, with_flag=False):
    """``2 I(P; T) / (H(P) + H(T))`` from the contingency counts.

    When both partitions are a single cluster the ratio is 0/0; it is
    reported as 0 and flagged.
    """
    A = _contingency(pred, truth)
    n = A.sum()
    ap = A.sum(axis=1)
    at = A.sum(axis=0)
    nz = A > 0
    num = -2 * np.sum(A[nz] * np.log(A[nz] * n / np.outer(ap, at)[nz]))
    den = np.sum(ap * np.log(ap / n)) + np.sum(at * np.log(at / n))
    degenerate = bool(den == 0)
    value = 0.0 if degenerate else float(num / den)
    if degenerate:
        log.warning("NMI undefined for single-cluster partitions; reported as 0")
    return (value, degenerate) if with_flag else value


def _overlap(pred, truth):
    """S[c, l] = number of nodes in predicted cluster c that carry label l."""
    kp = int(pred.max()) + 1
    S = np.zeros((kp, truth.shape[1]))
    np.add.at(S, pred, truth)
    return S


def _exhaustive_map(S):
    kp, kt = S.shape
    if max(kp, kt) > EXHAUSTIVE_MAX_K:
        raise MatchingError(f"exhaustive matching limited to K <= {EXHAUSTIVE_MAX_K}; use greedy matching")
    best, best_map = -1.0, None
    if kp <= kt:
        for perm in itertools.permutations(range(kt), kp):
            score = S[np.arange(kp), perm].sum()
            if score > best:
                best, best_map = score, np.array(perm)
        return best_map
    for perm in itertools.permutations(range(kp), kt):
        score = S[perm, np.arange(kt)].sum()
        if score > best:
            best_map = np.full(kp, -1)
            best_map[list(perm)] = np.arange(kt)
            best = score
    return best_map


def _greedy_map(pred, truth):
    kp = int(pred.max()) + 1
    sizes = np.bincount(pred, minlength=kp)
    # largest cluster first, ties to the smaller id; same for classes
    clusters = np.lexsort((np.arange(kp), -sizes))
    classes = np.lexsort((np.arange(truth.shape[1]), -truth.sum(axis=0)))
    mapping = np.full(kp, -1)
    for c, l in zip(clusters, classes):
        mapping[c] = l
    return mapping


def match_clusters(pred, truth, matching="exhaustive"):
    """Map each predicted cluster id to a label column (``-1`` if unmatched)."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = _as_matrix(truth)
    if matching == "exhaustive":
        return _exhaustive_map(_overlap(pred, truth))
    if matching == "greedy":
        return _greedy_map(pred, truth)
    raise MatchingError(f"unknown matching {matching!r}")


def _as_matrix(truth):
    truth = np.asarray(truth)
    if truth.ndim == 1:
        out = np.zeros((len(truth), int(truth.max()) + 1), dtype=np.int8)
        out[np.arange(len(truth)), truth] = 1
        return out
    return (truth != 0).astype(np.int8)


def precision_at_n(pred, truth, matching="identity"):
    """Mean fraction of each node's predicted communities found among its true ones.

    ``pred`` is a vector of ids or an N x n array of ranked ids. With
    ``exhaustive`` or ``greedy`` matching, ids are cluster ids that are first
    mapped onto label columns (single prediction per node only).
    """
    truth = _as_matrix(truth)
    pred = np.asarray(pred, dtype=np.int64)
    if pred.ndim == 1:
        pred = pred[:, None]
    if len(pred) != len(truth):
        raise ValueError("pred and truth must cover the same nodes")
    if matching != "identity":
        if pred.shape[1] != 1:
            raise MatchingError("cluster matching applies to one prediction per node")
        pred = match_clusters(pred[:, 0], truth, matching)[pred]
    valid = (pred >= 0) & (pred < truth.shape[1])
    rows = np.arange(len(pred))[:, None]
    hit = np.where(valid, truth[rows, np.clip(pred, 0, truth.shape[1] - 1)], 0)
    return float(hit.sum(axis=1).mean() / pred.shape[1])


def kfold(n_nodes, folds=5, seed=0, labels=None):
    """Shuffled, near-equal, disjoint validation folds as (train, validation) index pairs."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n_nodes < folds:
        raise ValueError("need at least one node per fold")
    order = np.random.default_rng(seed).permutation(n_nodes)
    parts = np.array_split(order, folds)
    splits = []
    for f in range(folds):
        train = np.sort(np.concatenate([parts[j] for j in range(folds) if j != f]))
        splits.append((train, np.sort(parts[f])))
    if labels is not None:
        y = _as_matrix(labels)
        present = y.sum(axis=0) > 0
        for f, (train, _) in enumerate(splits):
            lost = np.flatnonzero(present & (y[train].sum(axis=0) == 0))
            if lost.size:
                log.warning("fold %d: no training members for communities %s", f, lost.tolist())
    return splits


def mean_std(values):
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0


@dataclass
class MetricsReport:
    values: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def add(self, name, value):
        self.values.setdefault(name, []).append(float(value))

    def to_dict(self):
        out = {}
        for name, vals in self.values.items():
            mean, std = mean_std(vals)
            out[name] = {"mean": mean, "std": std, "per_fold": list(vals)}
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def table(self, scale=1.0):
        names = list(self.values)
        width = max([len(n) for n in names] + [6])
        lines = [f"{'metric':<{width}}  {'mean':>8}  {'std':>8}  n"]
        for name in names:
            mean, std = mean_std(self.values[name])
            lines.append(f"{name:<{width}}  {mean * scale:8.3f}  {std * scale:8.3f}  {len(self.values[name])}")
        for flag in self.flags:
            lines.append(f"! {flag}")
        return "\n".join(lines)
