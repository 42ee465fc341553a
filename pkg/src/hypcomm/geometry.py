"""Poincaré ball primitives.

Points are numpy arrays whose last axis holds the ball coordinates; every
function broadcasts over leading axes. Tangent vectors are plain arrays of
the same shape, implicitly based at the point they are paired with.
"""

import numpy as np

BALL_EPS = 1e-10
SAME_POINT_TOL = 1e-12
MIN_NORM = 1e-15


class GeometryError(ValueError):
    pass


def _sqnorm(x):
    return np.sum(x * x, axis=-1, keepdims=True)


def _check(*arrays):
    dim = None
    for a in arrays:
        if a.ndim == 0:
            raise GeometryError("points must have at least one coordinate")
        if not np.all(np.isfinite(a)):
            raise GeometryError("non-finite coordinates")
        if dim is not None and a.shape[-1] != dim:
            raise GeometryError(f"dimension mismatch: {dim} vs {a.shape[-1]}")
        dim = a.shape[-1]


def project(x, eps=BALL_EPS):
    """Radially clamp points to norm ``1 - eps``."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    maxnorm = 1.0 - eps
    scale = np.where(norm > maxnorm, maxnorm / np.maximum(norm, MIN_NORM), 1.0)
    return x * scale


def as_point(x, eps=BALL_EPS):
    """Validate coordinates and project them strictly inside the ball."""
    x = np.asarray(x, dtype=np.float64)
    _check(x)
    return project(x, eps)


def mobius_add(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check(x, y)
    return project(_mobius_add(x, y))


def _mobius_add(x, y):
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    num = (1 + 2 * xy + y2) * x + (1 - x2) * y
    den = 1 + 2 * xy + x2 * y2
    return num / np.maximum(den, MIN_NORM)


def distance(x, y):
    """Hyperbolic distance ``arcosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2)))``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check(x, y)
    return _distance(x, y)


def _distance(x, y):
    diff2 = np.sum((x - y) ** 2, axis=-1)
    den = (1 - np.sum(x * x, axis=-1)) * (1 - np.sum(y * y, axis=-1))
    delta = 2 * diff2 / den
    # arcosh(1 + t) = log1p(t + sqrt(t (t + 2))), exact near t = 0
    return np.log1p(delta + np.sqrt(delta * (delta + 2)))


def sq_distance(x, y):
    return distance(x, y) ** 2


def exp_map(x, v):
    """Exponential map at ``x``; ``Exp_x(0) = x``."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check(x, v)
    return project(_exp_map(x, v))


def _exp_map(x, v):
    vnorm = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.maximum(vnorm, MIN_NORM)
    step = np.tanh(vnorm / (1 - _sqnorm(x))) * v / safe
    return _mobius_add(x, step)


def log_map(x, y):
    """Logarithmic map at ``x``; returns the zero vector when ``x == y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check(x, y)
    return _log_map(x, y)


def _log_map(x, y):
    u = _mobius_add(-x, y)
    unorm = np.linalg.norm(u, axis=-1, keepdims=True)
    # coincident points: extend by continuity with the zero vector
    same = np.linalg.norm(x - y, axis=-1, keepdims=True) < SAME_POINT_TOL
    # artanh(|-x (+) y|) = d(x, y) / 2; the distance form stays accurate
    # near the boundary where |-x (+) y| rounds to 1
    half_d = 0.5 * _distance(x, y)[..., None]
    out = (1 - _sqnorm(x)) * half_d * u / np.maximum(unorm, MIN_NORM)
    return np.where(same, 0.0, out)


def grad_sq_distance(x, y):
    """Riemannian gradient of ``d(., y)^2`` at ``x``, i.e. ``-2 Log_x(y)``."""
    return -2.0 * log_map(x, y)


def inner(x, u, v):
    """Metric inner product ``<u, v>_x`` of tangent vectors at ``x``."""
    lam = 2.0 / (1 - np.sum(np.asarray(x) ** 2, axis=-1))
    return lam**2 * np.sum(np.asarray(u) * np.asarray(v), axis=-1)


def rgd_step(x, grad, lr):
    """One Riemannian gradient-descent step ``Exp_x(-lr * grad)``.

    Rows whose update reaches the boundary margin are left unchanged.
    """
    if lr <= 0:
        raise GeometryError("learning rate must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    _check(x, grad)
    new, _ = _rgd_step(x, grad, lr)
    return new


def _rgd_step(x, grad, lr):
    with np.errstate(over="ignore", invalid="ignore"):
        cand = _exp_map(x, -lr * grad)
    norm = np.linalg.norm(cand, axis=-1, keepdims=True)
    bad = ~np.isfinite(norm) | (norm >= 1 - BALL_EPS)
    return np.where(bad, x, cand), bad[..., 0]


class ConvergenceError(RuntimeError):
    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


def weighted_barycenter(points, weights=None, lr=5e-2, eps=1e-4, max_iters=1000, init=None):
    """Weighted Riemannian barycenter by fixed-step gradient iterations.

    Repeats ``mu <- Exp_mu(lr * 2 / sum(w) * sum_i w_i Log_mu(x_i))`` until
    consecutive iterates are within ``eps`` in hyperbolic distance. Starts
    from ``init`` when given, else from the weighted Euclidean mean.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _check(points)
    n = points.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if not total > 0:
        raise GeometryError("weights must have positive sum")
    keep = w > 0
    points, w = points[keep], w[keep]
    if init is None:
        mu = project(w @ points / total)
    else:
        mu = as_point(init)
    scale = lr * 2.0 / total
    for _ in range(max_iters):
        step = scale * (w @ _log_map(mu[None, :], points))
        new = project(_exp_map(mu, step))
        moved = _distance(mu, new)
        mu = new
        if moved <= eps:
            return mu
    raise ConvergenceError(f"barycenter did not converge in {max_iters} iterations", mu)
