"""Supernode coarsening and synthetic node features for featureless graphs.

Nodes are grouped into ``s`` disjoint blocks ("supernodes"); each node is
described by its normalized number of connections to every block, padded
with a uniform random block so that no two rows coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .graph import Graph
from .validation import check_rng


@dataclass
class SupernodePartition:
    """``assignments[v]`` is the supernode of node ``v``; ``sizes[j] = |S_j|``."""

    assignments: np.ndarray
    sizes: np.ndarray

    @property
    def n_supernodes(self) -> int:
        return len(self.sizes)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)


def block_sizes(n: int, s: int, block_size: Optional[int] = None) -> np.ndarray:
    """Sizes of ``s`` contiguous blocks covering ``n`` nodes.

    By default sizes differ by at most one, larger blocks first. With
    ``block_size`` the first ``s - 1`` blocks get exactly that many nodes and
    the last block takes the remainder.
    """
    n, s = int(n), int(s)
    if not 1 <= s <= n:
        raise ValueError(f"supernode count must be in [1, {n}], got {s}")
    if block_size is not None:
        rest = n - block_size * (s - 1)
        if block_size <= 0 or rest <= 0:
            raise ValueError(f"block size {block_size} x {s - 1} does not leave nodes for the last block")
        return np.array([block_size] * (s - 1) + [rest], dtype=np.int64)
    k, extra = divmod(n, s)
    return np.array([k + 1] * extra + [k] * (s - extra), dtype=np.int64)


def partition(n: int, s: int, block_size: Optional[int] = None, shuffle: bool = False,
              rng=None) -> SupernodePartition:
    """Split nodes ``0..n-1`` into ``s`` contiguous-id supernodes.

    ``shuffle=True`` assigns a random permutation of ids to the same block
    sizes instead of contiguous ranges.
    """
    sizes = block_sizes(n, s, block_size)
    assign = np.repeat(np.arange(len(sizes)), sizes)
    if shuffle:
        assign = assign[check_rng(rng).permutation(n)]
    return SupernodePartition(assign, sizes)


def grouped_partition(groups: Sequence[Sequence[int]], counts: Sequence[int], n: int,
                      block_sizes_per_group: Optional[Sequence[Optional[int]]] = None) -> SupernodePartition:
    """Partition each node group (e.g. drugs and targets) separately.

    Supernode ids of later groups follow those of earlier groups. Every node
    ``0..n-1`` must belong to exactly one group.
    """
    assign = np.full(n, -1, dtype=np.int64)
    sizes = []
    offset = 0
    bs = block_sizes_per_group or [None] * len(groups)
    for nodes, s, b in zip(groups, counts, bs):
        nodes = np.asarray(nodes, dtype=np.int64)
        if (assign[nodes] != -1).any():
            raise ValueError("node groups overlap")
        part_sizes = block_sizes(len(nodes), s, b)
        assign[nodes] = offset + np.repeat(np.arange(len(part_sizes)), part_sizes)
        sizes.extend(part_sizes.tolist())
        offset += len(part_sizes)
    if (assign == -1).any():
        raise ValueError(f"{int((assign == -1).sum())} nodes are in no group")
    return SupernodePartition(assign, np.asarray(sizes, dtype=np.int64))


def connection_matrix(g: Graph, p: SupernodePartition) -> np.ndarray:
    """Row ``v``: connections of ``v`` to each supernode over its size."""
    counts = np.zeros((g.n, p.n_supernodes))
    if g.n_edges:
        u, v = g.edges[:, 0], g.edges[:, 1]
        np.add.at(counts, (u, p.assignments[v]), 1.0)
        np.add.at(counts, (v, p.assignments[u]), 1.0)
    return counts / p.sizes[None, :]


def connection_vector(g: Graph, p: SupernodePartition, v: int) -> np.ndarray:
    if not 0 <= v < g.n:
        raise IndexError(f"node {v} outside [0, {g.n})")
    counts = np.zeros(p.n_supernodes)
    for a, b in g.edges:
        if a == v:
            counts[p.assignments[b]] += 1
        if b == v:
            counts[p.assignments[a]] += 1
    return counts / p.sizes


def directed_count_matrix(g: Graph, p: SupernodePartition) -> np.ndarray:
    """Rows ``[incoming counts / sizes, outgoing counts / sizes]``."""
    if not g.directed:
        raise ValueError("graph is undirected; use connection_vector/connection_matrix")
    s = p.n_supernodes
    out = np.zeros((g.n, 2 * s))
    if g.n_edges:
        src, dst = g.edges[:, 0], g.edges[:, 1]
        np.add.at(out, (dst, p.assignments[src]), 1.0)
        np.add.at(out, (src, s + p.assignments[dst]), 1.0)
    sizes = np.concatenate([p.sizes, p.sizes])
    return out / sizes[None, :]


def directed_edge_count_vector(g: Graph, p: SupernodePartition, v: int) -> np.ndarray:
    if not g.directed:
        raise ValueError("graph is undirected; use connection_vector instead")
    return directed_count_matrix(g, p)[v]


@dataclass
class SyntheticFeatures:
    """Feature matrix plus the recipe that produced it."""

    matrix: np.ndarray
    n_supernodes: int
    rand_dim: int
    directed: bool
    partition: SupernodePartition
    seed: Optional[int] = None
    groups: Optional[list] = field(default=None, repr=False)

    @property
    def conn_dim(self) -> int:
        return self.matrix.shape[1] - self.rand_dim

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def connection_block(self) -> np.ndarray:
        return self.matrix[:, :self.conn_dim]

    @property
    def random_block(self) -> np.ndarray:
        return self.matrix[:, self.conn_dim:]


def _structure_block(g: Graph, p: SupernodePartition) -> np.ndarray:
    return directed_count_matrix(g, p) if g.directed else connection_matrix(g, p)


def _split_counts(total: int, groups) -> list:
    sizes = np.array([len(x) for x in groups], dtype=float)
    raw = np.floor(total * sizes / sizes.sum()).astype(int)
    raw = np.maximum(raw, 1)
    i = 0
    while raw.sum() < total:
        raw[i % len(raw)] += 1
        i += 1
    while raw.sum() > total:
        j = int(np.argmax(raw))
        raw[j] -= 1
    return raw.tolist()


def synthesize_features(g: Graph, s, rand_dim: int, rng=None, block_size: Optional[int] = None,
                        groups: Optional[Sequence[Sequence[int]]] = None,
                        shuffle: bool = False) -> SyntheticFeatures:
    """Supernode connection block followed by ``rand_dim`` uniform [0, 1] columns.

    ``s`` is a supernode count, or a list of counts when ``groups`` splits
    the nodes into separately partitioned sets (bipartite graphs).
    """
    if rand_dim < 0:
        raise ValueError("rand_dim must be >= 0")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = check_rng(rng)
    if groups is not None:
        counts = list(s) if np.ndim(s) else _split_counts(int(s), groups)
        p = grouped_partition(groups, counts, g.n)
        groups = [np.asarray(x, dtype=np.int64) for x in groups]
    else:
        p = partition(g.n, int(s), block_size=block_size, shuffle=shuffle, rng=rng)
    conn = _structure_block(g, p)
    rand = rng.uniform(0.0, 1.0, size=(g.n, rand_dim))
    return SyntheticFeatures(np.hstack([conn, rand]), p.n_supernodes, rand_dim, g.directed, p,
                             seed, groups)


def match_feature_dim(features: SyntheticFeatures, target_dim: int, g: Graph,
                      rng=None) -> SyntheticFeatures:
    """Resize features to ``target_dim`` columns for use with another model.

    Widening adds supernodes (any odd leftover for directed graphs becomes an
    extra random column). Narrowing drops random columns first and only then
    reduces the supernode count.
    """
    target_dim = int(target_dim)
    per = 2 if features.directed else 1
    n_groups = len(features.groups) if features.groups else 1
    minimum = per * n_groups
    if target_dim < minimum:
        raise ValueError(f"target width {target_dim} is below the minimum {minimum} "
                         f"({n_groups} supernode(s), no random block)")
    current = features.dim
    if target_dim == current:
        return features
    rng = check_rng(rng)
    conn_dim = features.conn_dim
    if target_dim < current and target_dim >= conn_dim:
        keep = target_dim - conn_dim
        return SyntheticFeatures(features.matrix[:, :target_dim].copy(), features.n_supernodes,
                                 keep, features.directed, features.partition, features.seed,
                                 features.groups)
    if target_dim > current:
        # widen the structural block, keep the random block
        rand_dim = features.rand_dim
        extra = target_dim - current
        s = features.n_supernodes + extra // per
        rand_extra = extra % per
    else:
        rand_dim, rand_extra = 0, target_dim % per
        s = target_dim // per
    if s > g.n:
        raise ValueError(f"cannot build {s} supernodes on {g.n} nodes")
    if features.groups:
        counts = _split_counts(s, features.groups)
        p = grouped_partition(features.groups, counts, g.n)
    else:
        p = partition(g.n, s)
    conn = _structure_block(g, p)
    rand = features.random_block[:, :rand_dim]
    if rand_extra:
        rand = np.hstack([rand, rng.uniform(0.0, 1.0, size=(g.n, rand_extra))])
    return SyntheticFeatures(np.hstack([conn, rand]), p.n_supernodes, rand.shape[1],
                             features.directed, p, features.seed, features.groups)


class SupernodeFeaturizer(TransformerMixin, BaseEstimator):
    """Transformer wrapper: ``fit(graph)`` fixes the recipe, ``transform``
    returns the feature matrix.

    Parameters
    ----------
    n_supernodes : int
    rand_dim : int
    block_size : int, optional
        Force all but the last supernode to this size.
    random_state : int or None
    """

    def __init__(self, n_supernodes: int = 10, rand_dim: int = 10,
                 block_size: Optional[int] = None, random_state=None):
        self.n_supernodes = n_supernodes
        self.rand_dim = rand_dim
        self.block_size = block_size
        self.random_state = random_state

    def fit(self, graph: Graph, y=None):
        self.features_ = synthesize_features(graph, self.n_supernodes, self.rand_dim,
                                             rng=self.random_state, block_size=self.block_size)
        self.n_features_out_ = self.features_.dim
        self.graph_n_ = graph.n
        return self

    def transform(self, graph: Graph) -> np.ndarray:
        check_is_fitted(self, "features_")
        if graph.n != self.graph_n_:
            raise ValueError(f"fitted on a {self.graph_n_}-node graph, got {graph.n} nodes")
        p = self.features_.partition
        conn = _structure_block(graph, p)
        return np.hstack([conn, self.features_.random_block])
