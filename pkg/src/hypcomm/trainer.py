"""Joint training of node/context embeddings with the community loss.

Each full epoch runs, in order: first-order updates over all edges,
second-order updates over fresh random-walk contexts with negative
sampling, one community-loss step per node, then an EM refresh of the
mixture. Warm-up epochs run only the first two stages.
"""

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from . import _kernels, geometry
from .gaussian import MAX_DIM, zeta_table
from .graph import NegativeSampler, contexts, random_walks
from .mixture import MixtureModel, em_fit

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    dim: int = 2
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.1
    lr: float = 1e-2
    epochs: int = 30
    warmup_epochs: int = 10
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 5
    negatives: int = 5
    K: int = 2
    batch_size: int | None = None
    seed: int = 0
    init_radius: float = 1e-2
    em_max_iters: int = 200
    o3_max_step: float = 1.0

    def validate(self):
        if not (1 <= self.dim <= MAX_DIM):
            raise ValueError(f"dim must be in [1, {MAX_DIM}]")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be nonnegative")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.warmup_epochs <= self.epochs):
            raise ValueError("warmup_epochs must be between 0 and epochs")
        if min(self.walks_per_node, self.walk_length, self.window, self.K) < 1:
            raise ValueError("walks, walk length, window and K must be >= 1")
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        return self


@dataclass
class EmbeddingTable:
    phi: np.ndarray
    ctx: np.ndarray

    @classmethod
    def random(cls, n, dim, rng, radius=1e-2):
        def draw():
            u = rng.normal(size=(n, dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = radius * rng.random(n) ** (1.0 / dim)
            return u * r[:, None]

        return cls(draw(), draw())

    def copy(self):
        return EmbeddingTable(self.phi.copy(), self.ctx.copy())


def _sq_dist(x, y):
    return float(geometry.distance(x, y)) ** 2


def o1_loss(table, edges):
    edges = np.asarray(edges).reshape(-1, 2)
    d2 = geometry.distance(table.phi[edges[:, 0]], table.phi[edges[:, 1]]) ** 2
    return float(-np.sum(log_expit(-d2)))


def o1_gradients(table, i, j):
    """Riemannian gradients of ``-log sigmoid(-d^2(phi_i, phi_j))`` w.r.t. phi_i and phi_j."""
    s = expit(_sq_dist(table.phi[i], table.phi[j]))
    gi = -2.0 * geometry.log_map(table.phi[i], table.phi[j]) * s
    gj = -2.0 * geometry.log_map(table.phi[j], table.phi[i]) * s
    return gi, gj


def o1_update(table, edge, lr, alpha=1.0):
    """One first-order RGD update of both endpoints of ``edge`` (in place)."""
    i, j = edge
    gi, gj = o1_gradients(table, i, j)
    table.phi[i] = geometry.rgd_step(table.phi[i], alpha * gi, lr)
    table.phi[j] = geometry.rgd_step(table.phi[j], alpha * gj, lr)
    return table


def o2_loss(table, i, j, negatives):
    loss = -log_expit(-_sq_dist(table.phi[i], table.ctx[j]))
    for k in negatives:
        loss -= log_expit(_sq_dist(table.phi[i], table.ctx[k]))
    return float(loss)


def o2_gradients(table, i, j, negatives):
    """Gradients for phi_i, ctx_j and each negative ctx_k, all at the current snapshot."""
    phi_i = table.phi[i]
    s = expit(_sq_dist(phi_i, table.ctx[j]))
    gi = -2.0 * geometry.log_map(phi_i, table.ctx[j]) * s
    gj = -2.0 * geometry.log_map(table.ctx[j], phi_i) * s
    gks = []
    for k in negatives:
        sk = expit(-_sq_dist(phi_i, table.ctx[k]))
        gi = gi + 2.0 * geometry.log_map(phi_i, table.ctx[k]) * sk
        gks.append(2.0 * geometry.log_map(table.ctx[k], phi_i) * sk)
    return gi, gj, gks


def o2_update(table, i, j, negatives, lr, beta=1.0):
    gi, gj, gks = o2_gradients(table, i, j, negatives)
    table.phi[i] = geometry.rgd_step(table.phi[i], beta * gi, lr)
    table.ctx[j] = geometry.rgd_step(table.ctx[j], beta * gj, lr)
    for k, gk in zip(negatives, gks):
        table.ctx[k] = geometry.rgd_step(table.ctx[k], beta * gk, lr)
    return table


def o3_loss(table, model, w, ztable=None):
    ztable = ztable if ztable is not None else zeta_table(model.dim)
    d2 = geometry.distance(table.phi[:, None, :], model.mus[None, :, :]) ** 2
    sig = model.sigmas
    logz = np.array([ztable.log_zeta_at(s) for s in sig])
    return float(np.sum(w * (d2 / (2 * sig**2) + logz)))


def o3_gradients(table, model, w):
    """``sum_k w_ik / (2 sigma_k^2) * grad d^2(phi_i, mu_k)`` for every node."""
    phi = table.phi
    logs = geometry.log_map(phi[:, None, :], model.mus[None, :, :])
    coef = np.asarray(w) / (2 * model.sigmas**2)
    return np.einsum("nk,nkm->nm", coef, -2.0 * logs)


def o3_update(table, model, w, lr, gamma=1.0, max_step=1.0):
    """One community-loss step for every node.

    The effective step ``lr * gamma * sum_k w_ik / sigma_k^2`` is capped at
    ``max_step`` (a convex combination of the Log vectors toward the means
    when 1); ``max_step <= 0`` disables the cap.
    """
    g = gamma * o3_gradients(table, model, w)
    if max_step > 0:
        total = lr * gamma * np.sum(np.asarray(w) / model.sigmas**2, axis=1)
        g *= np.where(total > max_step, max_step / np.maximum(total, 1e-300), 1.0)[:, None]
    table.phi[:] = geometry.rgd_step(table.phi, g, lr)
    return table


@dataclass
class TrainResult:
    embeddings: EmbeddingTable
    model: MixtureModel | None
    resp: np.ndarray | None
    history: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def final_losses(self):
        return self.history[-1]["losses"] if self.history else {}


def _epoch_seed(seed, epoch, stream):
    return np.random.SeedSequence([seed, epoch, stream])


def train(g, cfg, callback=None):
    """Train embeddings and a K-component mixture on graph ``g``."""
    cfg.validate()
    if g.n_nodes < cfg.K:
        raise ValueError(f"K={cfg.K} exceeds the number of nodes ({g.n_nodes})")
    rng = np.random.default_rng(_epoch_seed(cfg.seed, 0, 0))
    table = EmbeddingTable.random(g.n_nodes, cfg.dim, rng, cfg.init_radius)
    ztable = zeta_table(cfg.dim)
    sampler = NegativeSampler.from_graph(g) if g.n_edges else None
    batch = cfg.batch_size or 1
    model, w = None, None
    history = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        erng = np.random.default_rng(_epoch_seed(cfg.seed, epoch + 1, 1))
        losses = {}
        skipped = 0
        if cfg.alpha > 0 and g.n_edges:
            edges = g.edges[erng.permutation(g.n_edges)]
            loss, sk = _kernels.o1_pass(table.phi, edges, cfg.lr * cfg.alpha, batch)
            losses["o1"], skipped = loss, skipped + sk
        if cfg.beta > 0 and g.n_edges:
            corpus = random_walks(g, cfg.walks_per_node, cfg.walk_length, seed=erng.integers(2**63))
            centers, ctxs = contexts(corpus, cfg.window, seed=erng.integers(2**63))
            order = erng.permutation(len(centers))
            centers, ctxs = centers[order], ctxs[order]
            negs = sampler.sample((len(centers), cfg.negatives), erng).astype(np.int64)
            loss, sk = _kernels.o2_pass(table.phi, table.ctx, centers, ctxs, negs, cfg.lr * cfg.beta, batch)
            losses["o2"], skipped = loss, skipped + sk
        if epoch + 1 >= cfg.warmup_epochs:
            if model is not None and cfg.gamma > 0:
                loss, sk = _kernels.o3_pass(
                    table.phi,
                    erng.permutation(g.n_nodes),
                    model.mus,
                    model.sigmas,
                    np.array([ztable.log_zeta_at(s) for s in model.sigmas]),
                    w,
                    cfg.lr * cfg.gamma,
                    cfg.o3_max_step,
                )
                losses["o3"], skipped = loss, skipped + sk
            # the first fit happens at the end of warm-up
            init = model if model is not None else "kmeans++"
            fit = em_fit(table.phi, cfg.K, init=init, max_iters=cfg.em_max_iters, seed=cfg.seed + epoch, table=ztable)
            model, w = fit.model, fit.resp
            losses["loglik"] = fit.loglik[-1]
        if not (np.all(np.linalg.norm(table.phi, axis=1) < 1) and np.all(np.linalg.norm(table.ctx, axis=1) < 1)):
            raise FloatingPointError("embedding left the ball")
        if skipped:
            log.debug("epoch %d: %d boundary updates skipped", epoch, skipped)
        rec = {"epoch": epoch, "losses": losses, "skipped": int(skipped), "seconds": time.perf_counter() - t0}
        history.append(rec)
        if callback is not None:
            callback(epoch, table, model, w)
    return TrainResult(table, model, w, history, asdict(cfg))
