"""Mean target connectivity matrix (MTCM) for complete-graph translation.

The model is trained on ``T - mean(T_train)`` rather than on ``T`` itself,
and predictions are shifted back by the same mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autograd import ShapeError, Tensor, add, as_tensor, mul, transpose
from .decoder import DecoderParams, decode, decode_mlp_ablation, node_matrix
from .encoder import EncoderParams, encode
from .graph import build_graph, normalized_adjacency
from .validation import check_square


@dataclass
class TranslationPair:
    """Source and target connectivity matrices of one sample."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        self.source = check_square("source", self.source)
        self.target = check_square("target", self.target)
        if self.source.shape != self.target.shape:
            raise ShapeError(f"source {self.source.shape} and target {self.target.shape} differ")

    @property
    def order(self) -> int:
        return self.source.shape[0]


@dataclass
class MTCM:
    mean: np.ndarray
    sample_count: int

    @property
    def shape(self) -> tuple:
        return self.mean.shape


def compute_mtcm(train_targets: Sequence) -> MTCM:
    """Entrywise mean of the training target matrices."""
    mats = [np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64) for t in train_targets]
    if not mats:
        raise ValueError("need at least one training target")
    shape = mats[0].shape
    for m in mats:
        if m.shape != shape:
            raise ShapeError(f"ragged targets: {shape} vs {m.shape}")
    return MTCM(np.mean(np.stack(mats), axis=0), len(mats))


def difference_matrix(target, mtcm: MTCM) -> np.ndarray:
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != mtcm.shape:
        raise ShapeError(f"target {t.shape} vs MTCM {mtcm.shape}")
    return t - mtcm.mean


def reconstruct(pred_diff, mtcm: MTCM) -> np.ndarray:
    """``pred_diff + MTCM``, clipped to the correlation range [-1, 1]."""
    d = np.asarray(pred_diff.data if isinstance(pred_diff, Tensor) else pred_diff, dtype=np.float64)
    if d.shape != mtcm.shape:
        raise ShapeError(f"prediction {d.shape} vs MTCM {mtcm.shape}")
    return np.clip(d + mtcm.mean, -1.0, 1.0)


def translation_graph(source: np.ndarray, k_neighbors: int = 4):
    """Sparse encoder graph for a complete connectivity matrix.

    Each node keeps edges to its ``k_neighbors`` strongest (largest-valued)
    partners; the union is taken as an undirected graph.
    """
    s = check_square("source", source)
    n = s.shape[0]
    k = min(k_neighbors, n - 1)
    work = s.copy()
    np.fill_diagonal(work, -np.inf)
    nbrs = np.argsort(-work, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    pairs = np.sort(np.stack([rows, nbrs.ravel()], axis=1), axis=1)
    # mutual neighbours appear twice; dedupe here so build_graph stays quiet
    return build_graph(n, np.unique(pairs, axis=0), directed=False)


def translate_forward(source, encoder: EncoderParams, decoder: DecoderParams,
                      a_hat: Tensor | None = None, k_neighbors: int = 4) -> Tensor:
    """Predicted (difference) matrix for one source matrix, symmetrized.

    Node features are the rows of ``source``; row ``i`` of the output is the
    decoder's regression of node ``i``'s intermediate image.
    """
    if decoder.head != "identity":
        raise ValueError(f"translation needs a regression head ('identity'), got {decoder.head!r}")
    s = np.asarray(source.data if isinstance(source, Tensor) else source, dtype=np.float64)
    if decoder.n_outputs != s.shape[0]:
        raise ShapeError(f"decoder emits {decoder.n_outputs} values per row, matrix order is {s.shape[0]}")
    if a_hat is None:
        a_hat = normalized_adjacency(translation_graph(s, k_neighbors))
    latents = encode(a_hat, Tensor(s, dtype=encoder.weights[0].dtype), encoder)
    if decoder.kind == "mlp":
        rows = decode_mlp_ablation(latents, None, decoder)
    else:
        rows = decode(node_matrix(latents), decoder)
    return mul(add(rows, transpose(rows)), 0.5)


def difference_stats(pairs: Sequence[TranslationPair], mtcm: MTCM) -> np.ndarray:
    """Entrywise mean of the difference matrices (zero on the training set)."""
    return np.mean([difference_matrix(p.target, mtcm) for p in pairs], axis=0)


def as_pairs(pairs) -> list:
    out = []
    for p in pairs:
        out.append(p if isinstance(p, TranslationPair) else TranslationPair(*p))
    return out
