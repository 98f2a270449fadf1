"""Stack of graph-convolution layers mapping node features to latents."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autograd import ShapeError, Tensor, as_tensor, matmul, relu
from .validation import check_rng


class EncoderParams:
    """Weights ``W(0) .. W(k-1)`` of a ``k``-layer GCN stack (no biases)."""

    def __init__(self, weights: Sequence[Tensor]):
        self.weights = list(weights)
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"encoder layers do not chain: {a.shape} then {b.shape}")

    @property
    def dims(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def latent_dim(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> list:
        return list(self.weights)


def init_encoder(dims: Sequence[int], rng=None, dtype=np.float64) -> EncoderParams:
    """Glorot-uniform weights for layer widths ``dims = [C, H1, ..., L]``."""
    if len(dims) < 2:
        raise ValueError("dims needs at least an input and an output width")
    if any(int(d) <= 0 for d in dims):
        raise ValueError(f"all widths must be positive, got {list(dims)}")
    rng = check_rng(rng)
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        weights.append(Tensor(w, requires_grad=True, dtype=dtype))
    return EncoderParams(weights)


def gcn_layer(a_hat: Tensor, features: Tensor, weight: Tensor) -> Tensor:
    """``ReLU(A_hat @ F @ W)``."""
    features = as_tensor(features)
    if features.shape[0] != a_hat.shape[0]:
        raise ShapeError(f"{features.shape[0]} feature rows for a {a_hat.shape[0]}-node adjacency")
    if features.shape[1] != weight.shape[0]:
        raise ShapeError(f"feature width {features.shape[1]} != weight rows {weight.shape[0]}")
    # (A F) W and A (F W) are equal; pick the cheaper association
    if weight.shape[1] < features.shape[1]:
        return relu(matmul(a_hat, matmul(features, weight)))
    return relu(matmul(matmul(a_hat, features), weight))


def encode(a_hat: Tensor, features, params: EncoderParams) -> Tensor:
    """Latent node representations, one row per node."""
    h = as_tensor(features, dtype=params.weights[0].dtype)
    if h.shape[1] != params.dims[0]:
        raise ShapeError(f"features have {h.shape[1]} columns, encoder expects {params.dims[0]}")
    for w in params.weights:
        h = gcn_layer(a_hat, h, w)
    return h
