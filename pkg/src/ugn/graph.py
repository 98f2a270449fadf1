"""Graph container, normalized adjacency and negative edge sampling."""

from __future__ import annotations

import logging
from typing import Iterable, Optional

import numpy as np

from .autograd import Tensor
from .validation import check_rng

logger = logging.getLogger(__name__)

UNKNOWN = -1
"""Sentinel for nodes whose label is not revealed during training."""


class Graph:
    """Simple graph with optional node features and labels.

    Undirected graphs store each edge once as ``(u, v)`` with ``u <= v``.
    Use :func:`build_graph` rather than the constructor for raw input.
    """

    def __init__(self, n: int, edges: np.ndarray, directed: bool = False,
                 features: Optional[np.ndarray] = None,
                 node_labels: Optional[np.ndarray] = None,
                 edge_labels: Optional[np.ndarray] = None):
        self.n = int(n)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.directed = bool(directed)
        self.features = None if features is None else np.asarray(features, dtype=np.float64)
        self.node_labels = None if node_labels is None else np.asarray(node_labels, dtype=np.int64)
        self.edge_labels = None if edge_labels is None else np.asarray(edge_labels, dtype=np.int64)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set:
        return {(int(u), int(v)) for u, v in self.edges}

    def has_edge(self, u: int, v: int) -> bool:
        if not self.directed and u > v:
            u, v = v, u
        return (u, v) in self.edge_set()

    def adjacency(self, symmetric: Optional[bool] = None) -> np.ndarray:
        """Dense 0/1 adjacency. Directed graphs are symmetrized on request."""
        sym = (not self.directed) if symmetric is None else symmetric
        a = np.zeros((self.n, self.n))
        if self.n_edges:
            u, v = self.edges[:, 0], self.edges[:, 1]
            a[u, v] = 1.0
            if sym:
                a[v, u] = 1.0
        return a

    def is_symmetric(self) -> bool:
        a = self.adjacency()
        return bool(np.array_equal(a, a.T))

    def with_features(self, features) -> "Graph":
        return Graph(self.n, self.edges, self.directed, features, self.node_labels, self.edge_labels)

    def with_labels(self, node_labels) -> "Graph":
        return Graph(self.n, self.edges, self.directed, self.features, node_labels, self.edge_labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (self.n == other.n and self.directed == other.directed
                and same(self.edges, other.edges) and same(self.features, other.features)
                and same(self.node_labels, other.node_labels)
                and same(self.edge_labels, other.edge_labels))

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, edges={self.n_edges}, {kind})"


def build_graph(n: int, edges: Iterable, directed: bool = False,
                edge_labels: Optional[Iterable] = None, **kwargs) -> Graph:
    """Validate, canonicalize and deduplicate an edge list.

    Duplicates (after ordering ``u <= v`` for undirected graphs) are dropped;
    the first occurrence, and its label, is kept. Self-loops are dropped too,
    since the normalized adjacency adds its own.
    """
    n = int(n)
    if n <= 0:
        raise ValueError(f"node count must be positive, got {n}")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    arr = arr.reshape(-1, 2)
    labels = None if edge_labels is None else np.asarray(list(edge_labels), dtype=np.int64)
    if labels is not None and len(labels) != len(arr):
        raise ValueError(f"{len(labels)} edge labels for {len(arr)} edges")
    bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= n).any(axis=1))
    if bad.size:
        u, v = arr[bad[0]]
        raise IndexError(f"edge ({u}, {v}) has a node id outside [0, {n})")
    if not directed:
        arr = np.sort(arr, axis=1)
    keep, seen, dropped = [], set(), 0
    for i, (u, v) in enumerate(arr.tolist()):
        if u == v or (u, v) in seen:
            dropped += 1
            continue
        seen.add((u, v))
        keep.append(i)
    if dropped:
        logger.warning("build_graph: dropped %d duplicate or self-loop edges", dropped)
    keep = np.asarray(keep, dtype=np.intp)
    return Graph(n, arr[keep], directed,
                 edge_labels=None if labels is None else labels[keep], **kwargs)


def degree_vector(g: Graph, include_self_loop: bool = True) -> np.ndarray:
    """Degree of each node in the symmetrized graph, plus one for the self-loop."""
    d = g.adjacency(symmetric=True).sum(axis=1)
    return d + 1.0 if include_self_loop else d


def normalized_adjacency(g: Graph, dtype=np.float64) -> Tensor:
    """``D^-1/2 (A + I) D^-1/2`` on the symmetrized edge set."""
    a = g.adjacency(symmetric=True) + np.eye(g.n)
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return Tensor(inv_sqrt[:, None] * a * inv_sqrt[None, :], dtype=dtype)


def negative_sample(g: Graph, count: int, rng=None, restrict_to=None,
                    exclude: Optional[set] = None) -> np.ndarray:
    """Draw ``count`` distinct non-edges uniformly by rejection sampling.

    Pairs are ordered for directed graphs and canonical ``(u < v)`` otherwise.
    ``restrict_to`` limits both endpoints to a node subset; ``exclude`` adds
    further pairs (e.g. held-out positives) that must not be drawn.
    """
    rng = check_rng(rng)
    count = int(count)
    if count < 0:
        raise ValueError("count must be non-negative")
    nodes = np.arange(g.n) if restrict_to is None else np.unique(np.asarray(list(restrict_to), dtype=np.int64))
    positives = g.edge_set()
    if exclude:
        positives = positives | {(int(u), int(v)) for u, v in exclude}
    k = len(nodes)
    node_set = set(nodes.tolist())
    inside = sum(1 for u, v in positives if u in node_set and v in node_set)
    possible = k * (k - 1) if g.directed else k * (k - 1) // 2
    if count > possible - inside:
        raise ValueError(
            f"graph too dense: asked for {count} non-edges, only {possible - inside} exist")
    chosen: dict = {}
    budget = 100 * max(count, 1)
    tries = 0
    while len(chosen) < count:
        if tries >= budget:
            raise RuntimeError(f"negative_sample: gave up after {budget} draws ({len(chosen)}/{count})")
        batch = max(2 * (count - len(chosen)), 16)
        pairs = nodes[rng.integers(0, k, size=(batch, 2))]
        for u, v in pairs.tolist():
            tries += 1
            if u == v:
                continue
            if not g.directed and u > v:
                u, v = v, u
            if (u, v) in positives or (u, v) in chosen:
                continue
            chosen[(u, v)] = None
            if len(chosen) == count:
                break
    return np.asarray(list(chosen), dtype=np.int64).reshape(-1, 2)
