"""Compiled per-sample Riemannian SGD passes used by the trainer.

These mirror ``geometry`` and the ``o*_update`` functions in ``trainer``
exactly; the tests check the two routes against each other.
"""

import math

import numpy as np
from numba import njit

BALL_EPS = 1e-10
SAME_POINT_TOL = 1e-12
MIN_NORM = 1e-15


@njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit(cache=True)
def _dist_log(X, i, Y, j, out):
    """Write ``Log_x(y)`` into ``out`` and return ``d(x, y)`` for ``x = X[i]``, ``y = Y[j]``."""
    m = X.shape[1]
    xy = 0.0
    x2 = 0.0
    y2 = 0.0
    diff2 = 0.0
    for a in range(m):
        xa = X[i, a]
        ya = Y[j, a]
        xy += xa * ya
        x2 += xa * xa
        y2 += ya * ya
        diff2 += (xa - ya) ** 2
    delta = 2.0 * diff2 / ((1.0 - x2) * (1.0 - y2))
    d = math.log1p(delta + math.sqrt(delta * (delta + 2.0)))
    if math.sqrt(diff2) < SAME_POINT_TOL:
        for a in range(m):
            out[a] = 0.0
        return d
    # u = (-x) (+) y
    c1 = 1.0 - 2.0 * xy + y2
    c2 = 1.0 - x2
    den = max(1.0 - 2.0 * xy + x2 * y2, MIN_NORM)
    un2 = 0.0
    for a in range(m):
        out[a] = (-c1 * X[i, a] + c2 * Y[j, a]) / den
        un2 += out[a] * out[a]
    scale = (1.0 - x2) * 0.5 * d / max(math.sqrt(un2), MIN_NORM)
    for a in range(m):
        out[a] *= scale
    return d


@njit(cache=True)
def _rgd(X, i, grad, lr, tmp):
    """In-place ``X[i] <- Exp_X[i](-lr * grad)`` unless the result hits the boundary margin.

    Returns 1 when the update was skipped.
    """
    m = X.shape[1]
    vn = 0.0
    x2 = 0.0
    for a in range(m):
        vn += grad[a] * grad[a]
        x2 += X[i, a] * X[i, a]
    vn = lr * math.sqrt(vn)
    if vn == 0.0:
        return 0
    t = math.tanh(vn / (1.0 - x2)) / max(vn, MIN_NORM)
    xy = 0.0
    y2 = 0.0
    for a in range(m):
        tmp[a] = -lr * grad[a] * t
        xy += X[i, a] * tmp[a]
        y2 += tmp[a] * tmp[a]
    c1 = 1.0 + 2.0 * xy + y2
    c2 = 1.0 - x2
    den = max(1.0 + 2.0 * xy + x2 * y2, MIN_NORM)
    n2 = 0.0
    for a in range(m):
        tmp[a] = (c1 * X[i, a] + c2 * tmp[a]) / den
        n2 += tmp[a] * tmp[a]
    n = math.sqrt(n2)
    if not (n < 1.0 - BALL_EPS):
        return 1
    for a in range(m):
        X[i, a] = tmp[a]
    return 0


@njit(cache=True)
def _flush(table, grads, touched, n_touched, lr, tmp):
    skipped = 0
    for q in range(n_touched):
        v = touched[q]
        skipped += _rgd(table, v, grads[v], lr, tmp)
        for a in range(table.shape[1]):
            grads[v, a] = 0.0
    return skipped


@njit(cache=True)
def o1_pass(phi, edges, lr, batch):
    """First-order pass over ``edges`` (already in visiting order).

    Returns (loss, skipped updates). ``batch <= 1`` is plain per-edge SGD.
    """
    n, m = phi.shape
    li = np.empty(m)
    lj = np.empty(m)
    tmp = np.empty(m)
    grads = np.zeros((n, m))
    mark = np.zeros(n, dtype=np.bool_)
    touched = np.empty(n, dtype=np.int64)
    nt = 0
    loss = 0.0
    skipped = 0
    for e in range(edges.shape[0]):
        i = edges[e, 0]
        j = edges[e, 1]
        d = _dist_log(phi, i, phi, j, li)
        _dist_log(phi, j, phi, i, lj)
        d2 = d * d
        loss -= _log_sigmoid(-d2)
        s = -2.0 * _sigmoid(d2)
        if batch <= 1:
            for a in range(m):
                li[a] *= s
                lj[a] *= s
            skipped += _rgd(phi, i, li, lr, tmp)
            skipped += _rgd(phi, j, lj, lr, tmp)
            continue
        for a in range(m):
            grads[i, a] += s * li[a]
            grads[j, a] += s * lj[a]
        for v in (i, j):
            if not mark[v]:
                mark[v] = True
                touched[nt] = v
                nt += 1
        if (e + 1) % batch == 0:
            skipped += _flush(phi, grads, touched, nt, lr, tmp)
            for q in range(nt):
                mark[touched[q]] = False
            nt = 0
    if nt > 0:
        skipped += _flush(phi, grads, touched, nt, lr, tmp)
    return loss, skipped


@njit(cache=True)
def o2_pass(phi, ctx, centers, contexts, negatives, lr, batch):
    """Second-order pass with negative sampling.

    For each (center i, context j, negatives k_1..k_t) all gradients are
    taken at the same snapshot, then applied to phi_i, ctx_j and each ctx_k.
    """
    n, m = phi.shape
    t = negatives.shape[1]
    gi = np.empty(m)
    buf = np.empty(m)
    gj = np.empty(m)
    gk = np.empty((t, m))
    tmp = np.empty(m)
    gphi = np.zeros((n, m))
    gctx = np.zeros((n, m))
    mark_p = np.zeros(n, dtype=np.bool_)
    mark_c = np.zeros(n, dtype=np.bool_)
    tp = np.empty(n, dtype=np.int64)
    tc = np.empty(n, dtype=np.int64)
    np_ = 0
    nc = 0
    loss = 0.0
    skipped = 0
    for p in range(centers.shape[0]):
        i = centers[p]
        j = contexts[p]
        d = _dist_log(phi, i, ctx, j, buf)
        d2 = d * d
        loss -= _log_sigmoid(-d2)
        s = -2.0 * _sigmoid(d2)
        for a in range(m):
            gi[a] = s * buf[a]
        _dist_log(ctx, j, phi, i, gj)
        for a in range(m):
            gj[a] *= s
        for q in range(t):
            k = negatives[p, q]
            dk = _dist_log(phi, i, ctx, k, buf)
            dk2 = dk * dk
            loss -= _log_sigmoid(dk2)
            sk = 2.0 * _sigmoid(-dk2)
            for a in range(m):
                gi[a] += sk * buf[a]
            _dist_log(ctx, k, phi, i, buf)
            for a in range(m):
                gk[q, a] = sk * buf[a]
        if batch <= 1:
            skipped += _rgd(phi, i, gi, lr, tmp)
            skipped += _rgd(ctx, j, gj, lr, tmp)
            for q in range(t):
                skipped += _rgd(ctx, negatives[p, q], gk[q], lr, tmp)
            continue
        for a in range(m):
            gphi[i, a] += gi[a]
            gctx[j, a] += gj[a]
        if not mark_p[i]:
            mark_p[i] = True
            tp[np_] = i
            np_ += 1
        if not mark_c[j]:
            mark_c[j] = True
            tc[nc] = j
            nc += 1
        for q in range(t):
            k = negatives[p, q]
            for a in range(m):
                gctx[k, a] += gk[q, a]
            if not mark_c[k]:
                mark_c[k] = True
                tc[nc] = k
                nc += 1
        if (p + 1) % batch == 0:
            skipped += _flush(phi, gphi, tp, np_, lr, tmp)
            skipped += _flush(ctx, gctx, tc, nc, lr, tmp)
            for q in range(np_):
                mark_p[tp[q]] = False
            for q in range(nc):
                mark_c[tc[q]] = False
            np_ = 0
            nc = 0
    if np_ > 0:
        skipped += _flush(phi, gphi, tp, np_, lr, tmp)
    if nc > 0:
        skipped += _flush(ctx, gctx, tc, nc, lr, tmp)
    return loss, skipped


@njit(cache=True)
def o3_pass(phi, order, mus, sigmas, logz, w, lr, max_frac):
    """Community pass: one RGD step per node toward the weighted component means.

    The step is scaled down so that ``lr * sum_k w_ik / sigma_k^2 <= max_frac``
    (disabled when ``max_frac <= 0``).
    """
    n, m = phi.shape
    K = mus.shape[0]
    g = np.empty(m)
    buf = np.empty(m)
    tmp = np.empty(m)
    loss = 0.0
    skipped = 0
    for q in range(order.shape[0]):
        i = order[q]
        for a in range(m):
            g[a] = 0.0
        total = 0.0
        for k in range(K):
            if w[i, k] == 0.0:
                continue
            d = _dist_log(phi, i, mus, k, buf)
            loss += w[i, k] * (d * d / (2.0 * sigmas[k] ** 2) + logz[k])
            c = -w[i, k] / sigmas[k] ** 2
            total -= c
            for a in range(m):
                g[a] += c * buf[a]
        # never step past the means: with a tight component lr / sigma^2 can exceed 1
        if max_frac > 0.0 and lr * total > max_frac:
            for a in range(m):
                g[a] *= max_frac / (lr * total)
        skipped += _rgd(phi, i, g, lr, tmp)
    return loss, skipped
