"""Supervised cross-entropy, edge-smoothness loss, and their sum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autograd import Tensor, as_tensor, index, mul, softmax, softmax_cross_entropy, square, sub, tensor_sum
from .graph import UNKNOWN


@dataclass
class LossBreakdown:
    supervised: Tensor
    unsupervised: Tensor
    total: Tensor

    def as_floats(self) -> dict:
        return {"supervised": self.supervised.item(), "unsupervised": self.unsupervised.item(),
                "total": self.total.item()}


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), n_classes))
    known = labels != UNKNOWN
    out[np.flatnonzero(known), labels[known]] = 1.0
    return out


def supervised_loss(logits, labels, n_classes: Optional[int] = None) -> Tensor:
    """Cross-entropy summed over rows whose label is not ``UNKNOWN``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    known = labels != UNKNOWN
    if not known.any():
        raise ValueError("no supervised rows: every label is unknown")
    c = logits.shape[1] if n_classes is None else n_classes
    return softmax_cross_entropy(logits, one_hot(labels, c), known)


def unsupervised_loss(outputs, edges) -> Tensor:
    """``sum over edges (u, v) of (1/c) * ||O[u] - O[v]||^2``.

    ``outputs`` are used as given; pass membership distributions (softmaxed
    logits) to get the community-smoothness reading.
    """
    outputs = as_tensor(outputs)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return Tensor(np.zeros((), dtype=outputs.dtype))
    c = outputs.shape[1]
    diff = sub(index(outputs, edges[:, 0]), index(outputs, edges[:, 1]))
    return mul(tensor_sum(square(diff)), 1.0 / c)


def total_loss(logits, labels, edges, use_unsupervised: bool = True,
               edge_cap: Optional[int] = None, rng=None) -> LossBreakdown:
    """``L = Ls + Lu``; with ``use_unsupervised=False`` only ``Ls`` remains.

    ``edge_cap`` subsamples the edge list for ``Lu`` (uniformly, without
    replacement) when it is longer than the cap.
    """
    logits = as_tensor(logits)
    ls = supervised_loss(logits, labels)
    if use_unsupervised:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edge_cap is not None and len(edges) > edge_cap:
            if rng is None:
                raise ValueError("edge_cap subsampling needs an rng")
            edges = edges[np.sort(rng.choice(len(edges), size=edge_cap, replace=False))]
        lu = unsupervised_loss(softmax(logits), edges)
        total = ls + lu
    else:
        lu = Tensor(np.zeros((), dtype=logits.dtype))
        total = ls
    return LossBreakdown(ls, lu, total)


def mse_loss(pred, target) -> Tensor:
    pred = as_tensor(pred)
    target = as_tensor(target, dtype=pred.dtype)
    diff = sub(pred, target)
    return mul(tensor_sum(square(diff)), 1.0 / diff.size)
