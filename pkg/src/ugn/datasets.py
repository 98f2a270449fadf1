"""Text file formats, bundled fixtures and synthetic generators.

Formats (UTF-8, tab separated, ``#`` starts a comment):

* edge list  -- header ``n=<int> directed=<0|1>`` then ``u<TAB>v[<TAB>label]``
* labels     -- ``node_id<TAB>label``; absent nodes are unknown
* matrix pairs -- per sample a line ``N``, N rows of S, a blank line, N rows of T
* triples    -- ``head<TAB>relation<TAB>tail`` with a vocabulary sidecar
  of ``kind<TAB>name<TAB>id`` lines (kind is ``entity`` or ``relation``)
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import UNKNOWN, Graph, build_graph
from .mtcm import TranslationPair
from .validation import check_rng

FIXTURES = ("karate", "football", "polbooks")


class FormatError(ValueError):
    """Malformed input file; the message carries ``path:line``."""


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].rstrip("\r\n")
            yield lineno, line


# -- edge lists --------------------------------------------------------------

def load_edge_list(path) -> Graph:
    n = directed = None
    edges, labels = [], []
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        if n is None:
            try:
                fields = dict(tok.split("=", 1) for tok in line.split())
                n = int(fields["n"])
                directed = fields.get("directed", "0") not in ("0", "false", "False")
            except (ValueError, KeyError):
                raise FormatError(f"{path}:{lineno}: expected header 'n=<int> directed=<0|1>'") from None
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise FormatError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(parts)}")
        try:
            u, v = int(parts[0]), int(parts[1])
            lab = int(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer field in {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise IndexError(f"{path}:{lineno}: edge ({u}, {v}) outside [0, {n})")
        edges.append((u, v))
        labels.append(lab)
    if n is None:
        raise FormatError(f"{path}: missing header line")
    has_labels = any(l is not None for l in labels)
    if has_labels and any(l is None for l in labels):
        raise FormatError(f"{path}: edge labels must be given for all edges or none")
    return build_graph(n, edges, directed, edge_labels=labels if has_labels else None)


def save_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={g.n} directed={int(g.directed)}\n")
        for i, (u, v) in enumerate(g.edges.tolist()):
            if g.edge_labels is not None:
                fh.write(f"{u}\t{v}\t{int(g.edge_labels[i])}\n")
            else:
                fh.write(f"{u}\t{v}\n")


def load_labels(path, n: int) -> np.ndarray:
    labels = np.full(n, UNKNOWN, dtype=np.int64)
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'node_id<TAB>label'")
        try:
            node, lab = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer field") from None
        if not 0 <= node < n:
            raise IndexError(f"{path}:{lineno}: node {node} outside [0, {n})")
        labels[node] = lab
    return labels


def save_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, lab in enumerate(np.asarray(labels).tolist()):
            if lab != UNKNOWN:
                fh.write(f"{node}\t{lab}\n")


# -- matrices -----------------------------------------------------------------

def save_matrix(m, path) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def load_matrix(path) -> np.ndarray:
    rows = [[float(x) for x in line.split("\t")] for _, line in _lines(path) if line.strip()]
    return np.asarray(rows, dtype=np.float64)


def save_matrix_pairs(pairs: Sequence[TranslationPair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.order}\n")
            for row in p.source:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
            fh.write("\n")
            for row in p.target:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
            fh.write("\n")


def load_matrix_pairs(path, symmetric_tol: float = 1e-6) -> list:
    content = [(no, l.strip()) for no, l in _lines(path)]
    content = [(no, l) for no, l in content if l]
    pairs, i = [], 0
    while i < len(content):
        lineno, head = content[i]
        try:
            n = int(head)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: expected matrix order, got {head!r}") from None
        block = content[i + 1:i + 1 + 2 * n]
        if len(block) < 2 * n:
            raise FormatError(f"{path}:{lineno}: truncated sample, need {2 * n} rows")
        try:
            rows = [[float(x) for x in l.split()] for _, l in block]
        except ValueError as exc:
            raise FormatError(f"{path}: bad number in sample at line {lineno}: {exc}") from None
        for (no, _), r in zip(block, rows):
            if len(r) != n:
                raise FormatError(f"{path}:{no}: expected {n} values, got {len(r)}")
        s, t = np.array(rows[:n]), np.array(rows[n:])
        for name, m in (("S", s), ("T", t)):
            if not np.allclose(m, m.T, atol=symmetric_tol, rtol=0):
                raise FormatError(f"{path}:{lineno}: {name} is not symmetric within {symmetric_tol}")
        pairs.append(TranslationPair(s, t))
        i += 1 + 2 * n
    return pairs


# -- knowledge-graph triples -------------------------------------------------

class Vocabulary:
    """Stable string-to-id maps for entities and relations."""

    def __init__(self):
        self.entities: dict = {}
        self.relations: dict = {}

    def entity_id(self, name: str) -> int:
        return self.entities.setdefault(name, len(self.entities))

    @classmethod
    def load(cls, path) -> "Vocabulary":
        vocab = cls()
        for lineno, line in _lines(path):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[0] not in ("entity", "relation"):
                raise FormatError(f"{path}:{lineno}: expected 'entity|relation<TAB>name<TAB>id'")
            table = vocab.entities if parts[0] == "entity" else vocab.relations
            table[parts[1]] = int(parts[2])
        return vocab

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for kind, table in (("entity", self.entities), ("relation", self.relations)):
                for name, idx in sorted(table.items(), key=lambda kv: kv[1]):
                    fh.write(f"{kind}\t{name}\t{idx}\n")


def load_triples(path, vocab_path=None, grow_relations: bool = True):
    """Read ``head<TAB>relation<TAB>tail`` lines into integer triples.

    Returns ``(triples, vocab)`` where ``triples`` is an ``(m, 3)`` int
    array. Duplicates are kept. When ``vocab_path`` exists it is loaded
    first; the (possibly grown) vocabulary is written back to it.
    """
    vocab = Vocabulary.load(vocab_path) if vocab_path and os.path.exists(vocab_path) else Vocabulary()
    rows = []
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
        head, rel, tail = (p.strip() for p in parts)
        if rel not in vocab.relations:
            if not grow_relations:
                raise KeyError(f"{path}:{lineno}: unknown relation {rel!r}")
            vocab.relations[rel] = len(vocab.relations)
        rows.append((vocab.entity_id(head), vocab.relations[rel], vocab.entity_id(tail)))
    if vocab_path:
        vocab.save(vocab_path)
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3), vocab


# -- fixtures -----------------------------------------------------------------

def _fixture_path(name: str) -> Path:
    return Path(str(resources.files("ugn") / "data"))


def load_fixture(name: str) -> Graph:
    """Bundled community-detection graph with ground-truth labels."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    base = _fixture_path(name)
    edge_file = base / f"{name}.edges"
    if not edge_file.exists():
        raise FileNotFoundError(
            f"fixture {name!r} is not bundled; place {name}.edges and {name}.labels in {base}")
    g = load_edge_list(edge_file)
    return g.with_labels(load_labels(base / f"{name}.labels", g.n))


def available_fixtures() -> list:
    base = _fixture_path("")
    return [name for name in FIXTURES if (base / f"{name}.edges").exists()]


# -- generators ---------------------------------------------------------------

def generate_sbm(n: int, communities: int, p_in: float, p_out: float, rng=None) -> Graph:
    """Planted-partition graph with balanced contiguous communities."""
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if not 1 <= communities <= n:
        raise ValueError("communities must be in [1, n]")
    rng = check_rng(rng)
    labels = np.repeat(np.arange(communities), np.diff(np.linspace(0, n, communities + 1).astype(int)))
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    return build_graph(n, edges, directed=False, node_labels=labels)


def _cosine(x: np.ndarray) -> np.ndarray:
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    s = np.clip(x @ x.T, -1.0, 1.0)
    return (s + s.T) / 2.0


def generate_translation_pairs(order: int, count: int, alpha: float = 1.0, beta: float = 0.0,
                               noise: float = 0.0, rng=None, rank: int = 4,
                               shared: float = 0.0, population: float = 0.0) -> list:
    """Synthetic source/target connectivity pairs.

    ``S`` is the cosine-similarity matrix of random node factors; with
    ``shared > 0`` part of each factor matrix is common to all samples, so
    targets resemble each other the way real connectomes do. The target is
    ``T = tanh(alpha * S + beta * S @ S / order + population * P + noise * E)``
    with symmetric Gaussian ``E`` and ``P`` a fixed symmetric pattern drawn
    once per call, standing in for structure every target shares but the
    source does not reveal.
    """
    if order < 2:
        raise ValueError("matrix order must be >= 2")
    if not 0.0 <= shared <= 1.0:
        raise ValueError("shared must be in [0, 1]")
    rng = check_rng(rng)
    base = rng.standard_normal((order, rank))
    pattern = _cosine(rng.standard_normal((order, rank)))
    pairs = []
    for _ in range(count):
        own = rng.standard_normal((order, rank))
        s = _cosine(np.sqrt(shared) * base + np.sqrt(1.0 - shared) * own)
        z = alpha * s
        if beta:
            z = z + beta * (s @ s) / order
        if population:
            z = z + population * pattern
        if noise:
            e = rng.standard_normal((order, order))
            z = z + noise * (e + e.T) / np.sqrt(2.0)
        t = np.tanh(z)
        pairs.append(TranslationPair(s, (t + t.T) / 2.0))
    return pairs
