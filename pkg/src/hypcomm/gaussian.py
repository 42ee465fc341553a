"""Riemannian Gaussian distributions on the Poincaré ball.

The normalizing constant is the alternating closed form

    zeta_m(s) = sqrt(pi/2) s / 2^(m-1)
                * sum_k (-1)^k C(m-1, k) exp(p_k^2 s^2 / 2) (1 + erf(p_k s / sqrt 2))

with ``p_k = m - 1 - 2k``. For small ``s`` and large ``m`` the terms cancel
almost completely, so tables are evaluated with mpmath at high precision and
only then rounded to float64.

This constant omits the area of the unit sphere ``S^(m-1)``: the integral of
``exp(-d(x, mu)^2 / 2 s^2)`` against the hyperbolic volume equals
``sphere_area(m) * zeta(m, s)``. The factor is constant in ``s`` and cancels
in responsibilities and in the sigma estimate.
"""

import json
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import mpmath
import numpy as np

from . import geometry

MAX_DIM = 10
SIGMA_MIN = 1e-3
SIGMA_MAX = 2.0
SIGMA_STEP = 1e-3
CACHE_ENV = "HYPCOMM_CACHE_DIR"
_DPS = 60


class DimensionError(ValueError):
    pass


class SigmaRangeError(ValueError):
    pass


class DegenerateClusterError(ValueError):
    pass


def _check_dim(m):
    if not (1 <= m <= MAX_DIM):
        raise DimensionError(f"dimension {m} unsupported (1 <= m <= {MAX_DIM})")


def _series(m, s):
    """Return (S, dS/ds) of the alternating sum, as mpmath numbers."""
    total = mpmath.mpf(0)
    dtotal = mpmath.mpf(0)
    c = mpmath.sqrt(2 / mpmath.pi)
    for k in range(m):
        p = m - 1 - 2 * k
        coef = (-1) ** k * math.comb(m - 1, k)
        term = mpmath.exp(p * p * s * s / 2) * (1 + mpmath.erf(p * s / mpmath.sqrt(2)))
        total += coef * term
        dtotal += coef * (p * p * s * term + p * c)
    return total, dtotal


def _log_zeta_mp(m, s):
    s = mpmath.mpf(s)
    total, _ = _series(m, s)
    return mpmath.log(mpmath.sqrt(mpmath.pi / 2) * s / 2 ** (m - 1) * total)


def _phi_inverse_mp(m, s):
    s = mpmath.mpf(s)
    total, dtotal = _series(m, s)
    return s**2 + s**3 * dtotal / total


def log_zeta(m, sigma):
    _check_dim(m)
    if not (SIGMA_MIN <= sigma <= SIGMA_MAX):
        raise SigmaRangeError(f"sigma={sigma} outside [{SIGMA_MIN}, {SIGMA_MAX}]")
    with mpmath.workdps(_DPS):
        return float(_log_zeta_mp(m, sigma))


def zeta(m, sigma):
    """Closed-form normalizing constant ``zeta_m(sigma)``."""
    return math.exp(log_zeta(m, sigma))


def sphere_area(m):
    """Area of the unit sphere ``S^(m-1)`` (2 for m = 1, 2 pi for m = 2)."""
    return 2 * math.pi ** (m / 2) / math.gamma(m / 2)


def phi_inverse(m, sigma):
    """``sigma^3 * d/dsigma log zeta_m(sigma)``, evaluated analytically."""
    _check_dim(m)
    if not (SIGMA_MIN <= sigma <= SIGMA_MAX):
        raise SigmaRangeError(f"sigma={sigma} outside [{SIGMA_MIN}, {SIGMA_MAX}]")
    with mpmath.workdps(_DPS):
        return float(_phi_inverse_mp(m, sigma))


@dataclass(frozen=True, eq=False)
class ZetaTable:
    """Precomputed ``log zeta_m`` and ``phi_inverse`` on a sigma grid."""

    dim: int
    sigmas: np.ndarray
    log_zeta: np.ndarray
    phi_inv: np.ndarray

    @classmethod
    def compute(cls, dim, sigma_min=SIGMA_MIN, sigma_max=SIGMA_MAX, step=SIGMA_STEP):
        _check_dim(dim)
        n = int(round((sigma_max - sigma_min) / step)) + 1
        sigmas = sigma_min + step * np.arange(n)
        logz = np.empty(n)
        phi = np.empty(n)
        with mpmath.workdps(_DPS):
            for i, s in enumerate(sigmas):
                logz[i] = float(_log_zeta_mp(dim, s))
                phi[i] = float(_phi_inverse_mp(dim, s))
        return cls(dim, sigmas, logz, phi)

    def sigma_index(self, target):
        """Grid index minimizing ``|target - phi_inv|``; ties go to the smaller sigma."""
        j = int(np.searchsorted(self.phi_inv, target))
        if j == 0:
            return 0
        if j >= len(self.phi_inv):
            return len(self.phi_inv) - 1
        lo = target - self.phi_inv[j - 1]
        hi = self.phi_inv[j] - target
        return j - 1 if lo <= hi else j

    def log_zeta_at(self, sigma):
        """Table lookup of ``log zeta`` for a grid sigma; falls back to direct evaluation."""
        i = int(round((sigma - self.sigmas[0]) / (self.sigmas[1] - self.sigmas[0])))
        if 0 <= i < len(self.sigmas) and abs(self.sigmas[i] - sigma) < 1e-12:
            return float(self.log_zeta[i])
        return log_zeta(self.dim, sigma)

    def to_json(self):
        return json.dumps(
            {
                "dim": self.dim,
                "sigmas": self.sigmas.tolist(),
                "log_zeta": self.log_zeta.tolist(),
                "phi_inv": self.phi_inv.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            int(doc["dim"]),
            np.array(doc["sigmas"], dtype=np.float64),
            np.array(doc["log_zeta"], dtype=np.float64),
            np.array(doc["phi_inv"], dtype=np.float64),
        )


def _cache_path(dim, sigma_min, sigma_max, step):
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    return Path(root) / f"zeta_m{dim}_{sigma_min!r}_{sigma_max!r}_{step!r}.json"


@lru_cache(maxsize=None)
def zeta_table(dim, sigma_min=SIGMA_MIN, sigma_max=SIGMA_MAX, step=SIGMA_STEP):
    """Memoized table per (dimension, grid); optionally cached on disk."""
    path = _cache_path(dim, sigma_min, sigma_max, step)
    if path is not None and path.exists():
        return ZetaTable.from_json(path.read_text())
    table = ZetaTable.compute(dim, sigma_min, sigma_max, step)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table.to_json())
    return table


@dataclass
class GaussianComponent:
    mu: np.ndarray
    sigma: float

    def __post_init__(self):
        self.mu = geometry.as_point(self.mu)
        self.sigma = float(self.sigma)
        if not self.sigma > 0:
            raise SigmaRangeError("sigma must be positive")


def log_density(x, g, table=None):
    """``-d(x, mu)^2 / (2 sigma^2) - log zeta_m(sigma)``; broadcasts over rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    m = g.mu.shape[-1]
    logz = table.log_zeta_at(g.sigma) if table is not None else log_zeta(m, g.sigma)
    d = geometry.distance(x, g.mu)
    return -(d**2) / (2 * g.sigma**2) - logz


def density(x, g, table=None):
    return np.exp(log_density(x, g, table))


def estimate_sigma(sq_dists, weights, table):
    """Grid-search sigma from the weighted mean squared distance."""
    weights = np.asarray(weights, dtype=np.float64)
    target = float(np.sum(weights * sq_dists) / np.sum(weights))
    return float(table.sigmas[table.sigma_index(target)])


def mle(points, weights=None, table=None, init=None):
    """Maximum-likelihood Riemannian Gaussian for weighted samples."""
    points = geometry.as_point(np.atleast_2d(points))
    n, m = points.shape
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,) or np.any(weights < 0):
        raise ValueError("weights must be a nonnegative vector, one per point")
    if not np.sum(weights) > 0:
        raise DegenerateClusterError("all weights are zero")
    table = table if table is not None else zeta_table(m)
    mu = geometry.weighted_barycenter(points, weights, init=init)
    sigma = estimate_sigma(geometry.distance(points, mu) ** 2, weights, table)
    return GaussianComponent(mu, sigma)
