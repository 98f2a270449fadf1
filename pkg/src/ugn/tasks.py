"""Task-specific feature builders and small orchestration helpers.

Covers malware confinement on device networks, two-phase reaction
prediction, rating-derived user features, knowledge-graph entity features,
few-shot subsampling and the supernode feature recipes for the large
link-prediction graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np

from .decoder import BOND_CODES
from .graph import Graph, build_graph
from .supernode import SyntheticFeatures, _structure_block, grouped_partition, synthesize_features
from .validation import check_rng

N_RELATIONS = 37
N_CATEGORIES = 27
BOND_TYPES = tuple(BOND_CODES)  # index order used by phase-2 heads


# -- device networks -----------------------------------------------------------

@dataclass
class IoTInstance:
    """One malware-spread snapshot.

    ``distances[i, j]`` is the distance between devices (0 = not connected);
    the diagonal is forced to 1 as a self-loop.
    """

    source: Graph
    target: Optional[Graph]
    infected: np.ndarray
    distances: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.source.n
        self.infected = np.asarray(self.infected, dtype=bool).reshape(-1)
        d = np.array(self.distances, dtype=np.float64)
        if self.infected.shape != (n,):
            raise ValueError(f"infected flags: expected {n} entries, got {self.infected.size}")
        if d.shape != (n, n):
            raise ValueError(f"distance matrix: expected {(n, n)}, got {d.shape}")
        if not np.allclose(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        if (d < 0).any():
            raise ValueError("distances must be non-negative")
        np.fill_diagonal(d, 1.0)
        self.distances = d

    @property
    def n(self) -> int:
        return self.source.n


def iot_node_features(instance: IoTInstance) -> np.ndarray:
    """Row of ones for infected devices, zeros otherwise; width ``n``."""
    n = instance.n
    return np.repeat(instance.infected.astype(np.float64)[:, None], n, axis=1)


def inverse_distance_vector(instance: IoTInstance, v: int) -> np.ndarray:
    """``1 / d[v, j]`` for connected ``j``, 0 when unconnected, 1 at ``v``."""
    if not 0 <= v < instance.n:
        raise IndexError(f"node {v} outside [0, {instance.n})")
    d = instance.distances[v].copy()
    d[v] = 1.0
    bad = (d > 0) & (d < 1)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise ValueError(f"distance d[{v}][{j}] = {d[j]} lies in (0, 1); distances must be >= 1")
    out = np.zeros_like(d)
    nz = d > 0
    out[nz] = 1.0 / d[nz]
    return out


def inverse_distance_matrix(instance: IoTInstance) -> np.ndarray:
    return np.stack([inverse_distance_vector(instance, v) for v in range(instance.n)])


# -- reactions -------------------------------------------------------------------

@dataclass
class ReactionInstance:
    """Reactant (and optionally product) as per-pair bond codes plus atom features."""

    atom_features: np.ndarray
    bonds: np.ndarray
    product_bonds: Optional[np.ndarray] = None

    def __post_init__(self):
        self.atom_features = np.asarray(self.atom_features, dtype=np.float64)
        self.bonds = np.asarray(self.bonds, dtype=np.float64)
        n = self.atom_features.shape[0]
        for name in ("bonds", "product_bonds"):
            b = getattr(self, name)
            if b is None:
                continue
            b = np.asarray(b, dtype=np.float64)
            if b.shape != (n, n) or not np.array_equal(b, b.T):
                raise ValueError(f"{name} must be a symmetric {n}x{n} matrix")
            if not np.isin(b, list(BOND_CODES.values())).all():
                raise ValueError(f"{name} has codes outside {sorted(BOND_CODES.values())}")
            setattr(self, name, b)

    @property
    def n_atoms(self) -> int:
        return self.atom_features.shape[0]

    def graph(self) -> Graph:
        iu, ju = np.nonzero(np.triu(self.bonds, k=1))
        return build_graph(self.n_atoms, np.stack([iu, ju], axis=1), features=self.atom_features)

    def changed_atoms(self) -> np.ndarray:
        """Ground-truth phase-1 labels: atoms with any bond changed."""
        if self.product_bonds is None:
            raise ValueError("no product given")
        return (self.bonds != self.product_bonds).any(axis=1)


@dataclass
class TwoPhaseResult:
    bonds: np.ndarray
    changed: np.ndarray
    n_predictions: int


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def chemistry_two_phase(reactant: ReactionInstance,
                        atom_head: Callable[[ReactionInstance], np.ndarray],
                        bond_head: Callable[[ReactionInstance, np.ndarray], np.ndarray],
                        threshold: float = 0.5) -> TwoPhaseResult:
    """Predict product bonds in two passes.

    ``atom_head(reactant)`` returns ``(N, 2)`` logits; an atom is marked when
    its class-1 probability exceeds ``threshold``. ``bond_head(reactant,
    pairs)`` returns ``(P, 5)`` logits over ``BOND_TYPES`` for the marked
    pairs only. All other pairs keep the reactant bond.
    """
    n = reactant.n_atoms
    probs = _softmax_rows(atom_head(reactant))
    if probs.shape != (n, 2):
        raise ValueError(f"atom head must return ({n}, 2) logits, got {probs.shape}")
    changed = probs[:, 1] > threshold
    marked = np.flatnonzero(changed)
    bonds = reactant.bonds.copy()
    pairs = np.array([(i, j) for k, i in enumerate(marked) for j in marked[k + 1:]],
                     dtype=np.int64).reshape(-1, 2)
    if len(pairs):
        logits = np.asarray(bond_head(reactant, pairs))
        if logits.shape != (len(pairs), len(BOND_TYPES)):
            raise ValueError(f"bond head must return ({len(pairs)}, {len(BOND_TYPES)}) logits")
        codes = np.array([BOND_CODES[t] for t in BOND_TYPES])[logits.argmax(axis=1)]
        bonds[pairs[:, 0], pairs[:, 1]] = codes
        bonds[pairs[:, 1], pairs[:, 0]] = codes
    count = n + comb(len(marked), 2)
    assert count == n + len(pairs)
    return TwoPhaseResult(bonds, changed, count)


# -- ratings ---------------------------------------------------------------------

def epinions_user_features(ratings, n_users: int, eps: float = 1.0) -> np.ndarray:
    """Per-category mean rating and mean helpfulness, ``2 * 27`` columns.

    ``ratings`` rows are ``(user, category, rating, helpfulness)``. Sums are
    divided by the count, or by ``eps`` when the count is zero.
    """
    r = np.asarray(ratings, dtype=np.float64).reshape(-1, 4)
    if len(r):
        users, cats = r[:, 0].astype(np.int64), r[:, 1].astype(np.int64)
        if users.min() < 0 or users.max() >= n_users:
            raise IndexError(f"user id outside [0, {n_users})")
        if cats.min() < 0 or cats.max() >= N_CATEGORIES:
            raise ValueError(f"category outside [0, {N_CATEGORIES})")
        for col, name in ((2, "rating"), (3, "helpfulness")):
            v = r[:, col]
            if ((v < 1) | (v > 5) | (v != np.round(v))).any():
                raise ValueError(f"{name} must be an integer in 1..5")
    else:
        users = cats = np.zeros(0, dtype=np.int64)
    sums = np.zeros((n_users, 2 * N_CATEGORIES))
    counts = np.zeros((n_users, N_CATEGORIES))
    np.add.at(sums, (users, cats), r[:, 2])
    np.add.at(sums, (users, cats + N_CATEGORIES), r[:, 3])
    np.add.at(counts, (users, cats), 1.0)
    denom = np.where(counts > 0, counts, eps)
    return sums / np.hstack([denom, denom])


# -- knowledge graphs ------------------------------------------------------------

@dataclass(frozen=True)
class KGTriple:
    head: int
    relation: int
    tail: int

    def __post_init__(self):
        if not 0 <= self.relation < N_RELATIONS:
            raise ValueError(f"relation id {self.relation} outside [0, {N_RELATIONS})")


def _triples_array(triples) -> np.ndarray:
    if len(triples) and isinstance(triples[0], KGTriple):
        return np.array([(t.head, t.relation, t.tail) for t in triples], dtype=np.int64)
    return np.asarray(triples, dtype=np.int64).reshape(-1, 3)


def yago_entity_features(triples, n_entities: int, rand_dim: int = 20, rng=None,
                         n_relations: int = N_RELATIONS) -> np.ndarray:
    """``[L_e, R_e, random]``: relation indicators as head, as tail, then noise."""
    t = _triples_array(triples)
    if len(t) and (t[:, 1].min() < 0 or t[:, 1].max() >= n_relations):
        bad = t[(t[:, 1] < 0) | (t[:, 1] >= n_relations)][0]
        raise ValueError(f"relation id {bad[1]} outside [0, {n_relations})")
    if len(t) and (t[:, [0, 2]].min() < 0 or t[:, [0, 2]].max() >= n_entities):
        raise IndexError(f"entity id outside [0, {n_entities})")
    rng = check_rng(rng)
    left = np.zeros((n_entities, n_relations))
    right = np.zeros((n_entities, n_relations))
    left[t[:, 0], t[:, 1]] = 1.0
    right[t[:, 2], t[:, 1]] = 1.0
    return np.hstack([left, right, rng.uniform(0.0, 1.0, size=(n_entities, rand_dim))])


def few_shot_subsample(triples, cap_per_relation: int, rng=None) -> np.ndarray:
    """Keep at most ``cap_per_relation`` triples per relation, drawn without
    replacement. Output keeps input order."""
    if cap_per_relation < 1:
        raise ValueError("cap_per_relation must be >= 1")
    t = _triples_array(triples)
    rng = check_rng(rng)
    keep = []
    for rel in np.unique(t[:, 1]):
        idx = np.flatnonzero(t[:, 1] == rel)
        if len(idx) > cap_per_relation:
            idx = rng.choice(idx, size=cap_per_relation, replace=False)
        keep.append(idx)
    keep = np.sort(np.concatenate(keep)) if keep else np.zeros(0, dtype=np.int64)
    return t[keep]


# -- supernode recipes -------------------------------------------------------------

@dataclass(frozen=True)
class FeatureRecipe:
    """How initial features are built for one featureless graph.

    ``group_sizes`` splits node ids into consecutive groups (e.g. drugs then
    targets) that are partitioned separately, with ``supernodes`` counts per
    group and optional forced ``block_sizes``.
    """

    name: str
    n_nodes: int
    supernodes: tuple
    rand_dim: int
    directed: bool = False
    group_sizes: Optional[tuple] = None
    block_sizes: Optional[tuple] = None

    @property
    def dim(self) -> int:
        return (2 if self.directed else 1) * sum(self.supernodes) + self.rand_dim


RECIPES = {
    "slashdot": FeatureRecipe("slashdot", 82_168, (83,), 10, directed=True, block_sizes=(1000,)),
    "ppi": FeatureRecipe("ppi", 8_245, (103,), 57),
    "ddi": FeatureRecipe("ddi", 1_514, (15,), 135),
    "dti": FeatureRecipe("dti", 7_341, (76, 35), 59, group_sizes=(5_017, 2_324),
                         block_sizes=(66, None)),
}


def recipe_features(recipe: FeatureRecipe | str, graph: Optional[Graph] = None, rng=None,
                    avg_degree: float = 2.0) -> SyntheticFeatures:
    """Build features per ``recipe``. Without ``graph`` a sparse random graph
    of the recipe's size stands in (only the width and block layout matter)."""
    if isinstance(recipe, str):
        recipe = RECIPES[recipe]
    rng = check_rng(rng)
    if graph is None:
        m = int(recipe.n_nodes * avg_degree / 2)
        edges = rng.integers(0, recipe.n_nodes, size=(m, 2))
        graph = build_graph(recipe.n_nodes, edges, directed=recipe.directed)
    if graph.n != recipe.n_nodes:
        raise ValueError(f"recipe {recipe.name!r} expects {recipe.n_nodes} nodes, got {graph.n}")
    if recipe.group_sizes is None:
        bs = recipe.block_sizes[0] if recipe.block_sizes else None
        return synthesize_features(graph, recipe.supernodes[0], recipe.rand_dim, rng, block_size=bs)
    bounds = np.cumsum((0,) + recipe.group_sizes)
    groups = [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    p = grouped_partition(groups, recipe.supernodes, graph.n, recipe.block_sizes)
    conn = _structure_block(graph, p)
    rand = rng.uniform(0.0, 1.0, size=(graph.n, recipe.rand_dim))
    return SyntheticFeatures(np.hstack([conn, rand]), p.n_supernodes, recipe.rand_dim,
                             graph.directed, p, None, groups)


def yago_shaped_triples(rng=None, n_entities: int = 500, per_relation=(12, 40)) -> np.ndarray:
    """Random triples where every one of the 37 relations has at least
    ``per_relation[0]`` instances."""
    rng = check_rng(rng)
    counts = rng.integers(per_relation[0], per_relation[1] + 1, size=N_RELATIONS)
    rel = np.repeat(np.arange(N_RELATIONS), counts)
    heads = rng.integers(0, n_entities, size=rel.size)
    tails = rng.integers(0, n_entities, size=rel.size)
    return np.stack([heads, rel, tails], axis=1)
