"""Graph ingestion, DeepWalk-style random walks and negative sampling."""

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GraphParseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph over dense ids ``0..n_nodes-1`` (CSR adjacency)."""

    tokens: tuple
    edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n_nodes, edges, tokens=None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n_nodes < 1:
            raise GraphParseError("empty graph")
        if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
            raise GraphParseError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        both = np.concatenate([edges, edges[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=n_nodes)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        if tokens is None:
            tokens = tuple(str(i) for i in range(n_nodes))
        return cls(tuple(tokens), edges, indptr, both[:, 1].copy())

    @property
    def n_nodes(self):
        return len(self.tokens)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, v):
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def index(self):
        return {t: i for i, t in enumerate(self.tokens)}


_NODES_HEADER = re.compile(r"^#\s*nodes\s*[:=]?\s*(\d+)\s*$", re.IGNORECASE)


def _read_text(source):
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"no such input: {path}")
        return path.read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_edge_list(source, extra_nodes=()):
    """Parse an edge list (two whitespace-separated tokens per line, ``#`` comments).

    Tokens get dense ids in order of first appearance. A ``# nodes: N``
    header pre-registers tokens ``"0"..."N-1"``; ``extra_nodes`` keeps
    isolated nodes known from elsewhere (e.g. a labels file).
    """
    ids = {}
    pairs = []

    def idx(tok):
        if tok not in ids:
            ids[tok] = len(ids)
        return ids[tok]

    for lineno, raw in enumerate(io.StringIO(_read_text(source)), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#") or line.startswith("%"):
            hdr = _NODES_HEADER.match(line)
            if hdr:
                for i in range(int(hdr.group(1))):
                    idx(str(i))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphParseError(f"line {lineno}: expected two node tokens, got {len(parts)}")
        pairs.append((idx(parts[0]), idx(parts[1])))
    for tok in extra_nodes:
        idx(str(tok))
    if not ids:
        raise GraphParseError("empty graph")
    tokens = [None] * len(ids)
    for tok, i in ids.items():
        tokens[i] = tok
    return Graph.from_edges(len(ids), np.array(pairs, dtype=np.int64).reshape(-1, 2), tokens)


def read_label_tokens(source):
    """Read ``node_token community[,community...]`` lines into a dict of lists."""
    out = {}
    for lineno, raw in enumerate(io.StringIO(_read_text(source)), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise GraphParseError(f"labels line {lineno}: expected 'node community[,community...]'")
        comms = [c for c in re.split(r"[,\s]+", parts[1]) if c]
        out.setdefault(parts[0], []).extend(comms)
    return out


def _community_sort_key(c):
    return (0, int(c), c) if re.fullmatch(r"-?\d+", c) else (1, 0, c)


def label_matrix(graph, label_tokens):
    """Binary N x K matrix (rows follow graph ids) plus the community names."""
    return token_label_matrix(graph.tokens, label_tokens, strict=False)


def token_label_matrix(tokens, label_tokens, strict=True):
    """Binary matrix with one row per token; ``strict`` requires a label for every token."""
    names = sorted({c for cs in label_tokens.values() for c in cs}, key=_community_sort_key)
    col = {c: k for k, c in enumerate(names)}
    y = np.zeros((len(tokens), len(names)), dtype=np.int8)
    for i, tok in enumerate(tokens):
        comms = label_tokens.get(tok)
        if comms is None:
            if strict:
                raise GraphParseError(f"no label for node {tok!r}")
            continue
        for c in comms:
            y[i, col[c]] = 1
    return y, names


def load_graph(edges_path, labels_path=None):
    """Load a graph and, optionally, its label matrix."""
    if labels_path is None:
        return load_edge_list(edges_path), None, None
    tokens = read_label_tokens(labels_path)
    g = load_edge_list(edges_path, extra_nodes=tokens.keys())
    y, names = label_matrix(g, tokens)
    return g, y, names


@dataclass(frozen=True, eq=False)
class WalkCorpus:
    """Walks as a padded array (``-1`` after a truncated walk)."""

    walks: np.ndarray

    def __iter__(self):
        for row in self.walks:
            yield row[row >= 0].tolist()

    def __len__(self):
        return len(self.walks)


def random_walks(g, walks_per_node=10, walk_length=80, seed=0):
    """Uniform-neighbour walks, ``walks_per_node`` from every node.

    A walk reaching a node without neighbours stops there.
    """
    if walks_per_node < 1 or walk_length < 1:
        raise ValueError("walks_per_node and walk_length must be >= 1")
    rng = np.random.default_rng(seed)
    deg = g.degrees
    starts = np.tile(np.arange(g.n_nodes), walks_per_node)
    walks = np.full((len(starts), walk_length), -1, dtype=np.int64)
    walks[:, 0] = starts
    cur = starts
    alive = np.ones(len(starts), dtype=bool)
    for step in range(1, walk_length):
        u = rng.random(len(starts))
        d = deg[np.maximum(cur, 0)]
        alive &= d > 0
        off = np.minimum((u * d).astype(np.int64), np.maximum(d - 1, 0))
        nxt = np.where(alive, g.indices[np.minimum(g.indptr[np.maximum(cur, 0)] + off, len(g.indices) - 1)], -1)
        walks[:, step] = nxt
        cur = nxt
    return WalkCorpus(walks)


def contexts(corpus, max_window=5, seed=0):
    """(center, context) pairs with a window size drawn uniformly from ``1..max_window`` per position."""
    if max_window < 1:
        raise ValueError("max_window must be >= 1")
    rng = np.random.default_rng(seed)
    walks = corpus.walks
    n, length = walks.shape
    win = rng.integers(1, max_window + 1, size=(n, length))
    centers, ctxs, keys = [], [], []
    pos = np.arange(length)
    for off in range(1, max_window + 1):
        for sign in (-1, 1):
            j = pos + sign * off
            okpos = (j >= 0) & (j < length)
            i_idx = pos[okpos]
            j_idx = j[okpos]
            c = walks[:, i_idx]
            x = walks[:, j_idx]
            ok = (c >= 0) & (x >= 0) & (win[:, i_idx] >= off)
            r, col = np.nonzero(ok)
            centers.append(c[r, col])
            ctxs.append(x[r, col])
            # ordering key: walk, center position, context position
            keys.append((r * length + i_idx[col]) * length + j_idx[col])
    keys = np.concatenate(keys)
    order = np.argsort(keys, kind="stable")
    return np.concatenate(centers)[order], np.concatenate(ctxs)[order]


@dataclass(frozen=True, eq=False)
class NegativeSampler:
    """Draws nodes with probability proportional to ``deg^(3/4)``."""

    probs: np.ndarray

    @classmethod
    def from_graph(cls, g, power=0.75):
        return cls.from_degrees(g.degrees, power)

    @classmethod
    def from_degrees(cls, degrees, power=0.75):
        w = np.asarray(degrees, dtype=np.float64) ** power
        if not w.sum() > 0:
            raise ValueError("negative sampling needs at least one node with positive degree")
        return cls(w / w.sum())

    def sample(self, size, rng):
        cdf = np.cumsum(self.probs)
        u = rng.random(size) * cdf[-1]
        return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def negative_sample(sampler, count, seed=0):
    if count < 1:
        raise ValueError("count must be >= 1")
    return sampler.sample(count, np.random.default_rng(seed))
