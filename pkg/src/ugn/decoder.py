"""Intermediate "image" matrices and the conv/pool/linear decoding head."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .autograd import (ShapeError, Tensor, as_tensor, concat, conv2d, matmul, maxpool2d,
                       mul, outer, relu, reshape)
from .validation import check_rng

HEADS = ("softmax", "sigmoid", "identity")
KINDS = ("conv", "mlp")

# bond type -> entry of the bond vector used by the chemistry augmentation
BOND_CODES = {"none": 0.0, "single": 0.25, "double": 0.5, "triple": 0.75, "aromatic": 1.0}


def edge_matrix(l_u, l_v) -> Tensor:
    """Outer product ``l_v^T x l_u``, i.e. ``M[i, j] = l_v[i] * l_u[j]``.

    Accepts single vectors ``(L,)`` or row batches ``(B, L)``.
    """
    l_u, l_v = as_tensor(l_u), as_tensor(l_v)
    if l_u.shape != l_v.shape:
        raise ShapeError(f"latent shapes differ: {l_u.shape} vs {l_v.shape}")
    return outer(l_v, l_u)


def node_matrix(l_u) -> Tensor:
    """Symmetric Gram image ``l_u^T x l_u`` used for node classification."""
    l_u = as_tensor(l_u)
    return outer(l_u, l_u)


def augmented_matrix(latent, aux) -> Tensor:
    """Gram image of ``[latent, aux]``, size ``(L + N) x (L + N)``.

    ``aux`` is a per-node structural vector with entries in [0, 1], such as
    an inverse-distance vector or a bond-code vector.
    """
    latent = as_tensor(latent)
    aux_t = as_tensor(aux, dtype=latent.dtype)
    if aux_t.data.size and (aux_t.data.min() < 0.0 or aux_t.data.max() > 1.0):
        raise ValueError("auxiliary entries must lie in [0, 1]")
    joined = concat([latent, aux_t], axis=-1)
    return outer(joined, joined)


class DecoderParams:
    """Weights of the decoding head.

    ``conv`` holds ``(kernels, bias)`` pairs, each followed by a max-pool of
    the matching entry in ``pools``; ``linear`` holds ``(weight, bias)``
    pairs. ``kind='mlp'`` skips the conv stages and feeds vectors directly.
    """

    def __init__(self, conv, pools, linear, head: str = "softmax", kind: str = "conv",
                 input_size: Optional[int] = None, padding: int = 1):
        if head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {head!r}")
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        self.conv = [tuple(c) for c in conv]
        self.pools = list(pools)
        self.linear = [tuple(l) for l in linear]
        self.head = head
        self.kind = kind
        self.input_size = input_size
        self.padding = padding

    @property
    def n_outputs(self) -> int:
        return self.linear[-1][0].shape[1]

    def parameters(self) -> list:
        params = []
        for k, b in self.conv:
            params += [k, b]
        for w, b in self.linear:
            params += [w, b]
        return params


def _glorot(rng, shape, fan_in, fan_out, dtype):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, dtype=dtype)


def conv_output_size(size: int, channels: Sequence[int], kernel: int, padding: int,
                     pool: int) -> int:
    """Spatial extent after the conv/pool stages; raises if the chain breaks."""
    for _ in channels:
        size = size + 2 * padding - kernel + 1
        if size < pool or size < 1:
            raise ValueError(
                f"decoder config: feature map shrinks to {size} before a {pool}x{pool} pool; "
                "use fewer conv stages or a larger latent size")
        size = (size - pool) // pool + 1
    return size


def init_decoder(input_size: int, n_outputs: int, channels: Sequence[int] = (8, 16, 32),
                 hidden: Sequence[int] = (64, 32), kernel: int = 3, padding: int = 1,
                 pool: int = 2, head: str = "softmax", kind: str = "conv", rng=None,
                 dtype=np.float64) -> DecoderParams:
    """Build decoder weights, validating the shape chain up front.

    For ``kind='conv'`` the input is an ``input_size`` square image; for
    ``kind='mlp'`` it is a vector of length ``input_size``. The head has
    ``len(hidden) + 1`` linear layers.
    """
    rng = check_rng(rng)
    if input_size <= 0 or n_outputs <= 0:
        raise ValueError("input_size and n_outputs must be positive")
    conv, pools = [], []
    if kind == "conv":
        side = conv_output_size(input_size, channels, kernel, padding, pool)
        c_in = 1
        for c_out in channels:
            k = _glorot(rng, (c_out, c_in, kernel, kernel), c_in * kernel * kernel,
                        c_out * kernel * kernel, dtype)
            conv.append((k, Tensor(np.zeros(c_out), requires_grad=True, dtype=dtype)))
            pools.append(pool)
            c_in = c_out
        flat = c_in * side * side
    elif kind == "mlp":
        flat = input_size
    else:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    linear = []
    widths = [flat, *hidden, n_outputs]
    for a, b in zip(widths[:-1], widths[1:]):
        linear.append((_glorot(rng, (a, b), a, b, dtype),
                       Tensor(np.zeros(b), requires_grad=True, dtype=dtype)))
    return DecoderParams(conv, pools, linear, head=head, kind=kind, input_size=input_size,
                         padding=padding)


def _linear_stack(h: Tensor, params: DecoderParams) -> Tensor:
    last = len(params.linear) - 1
    for i, (w, b) in enumerate(params.linear):
        h = matmul(h, w) + b
        if i < last:
            h = relu(h)
    return h


def decode(m, params: DecoderParams) -> Tensor:
    """Raw logits for one image ``(d, d)`` or a batch ``(B, d, d)``.

    Each conv stage is conv -> max-pool -> ReLU; the flattened map then goes
    through the linear layers with ReLU between them. No output activation
    is applied here.
    """
    if params.kind != "conv":
        raise ValueError("decode needs a conv head; use decode_mlp_ablation for kind='mlp'")
    m = as_tensor(m)
    single = m.ndim == 2
    if m.ndim == 2:
        x = reshape(m, (1, 1) + m.shape)
    elif m.ndim == 3:
        x = reshape(m, (m.shape[0], 1) + m.shape[1:])
    elif m.ndim == 4:
        x = m
    else:
        raise ShapeError(f"decode: expected a 2-, 3- or 4-D image, got {m.shape}")
    if params.input_size is not None and x.shape[-1] != params.input_size:
        raise ShapeError(f"decoder built for {params.input_size}x{params.input_size} images, "
                         f"got {x.shape[-2]}x{x.shape[-1]}")
    for (k, b), pool in zip(params.conv, params.pools):
        x = relu(maxpool2d(conv2d(x, k, b, stride=1, padding=params.padding), pool, pool))
    h = reshape(x, (x.shape[0], -1))
    out = _linear_stack(h, params)
    return reshape(out, (out.shape[1],)) if single else out


def decode_mlp_ablation(l_u, l_v=None, params: DecoderParams = None) -> Tensor:
    """Decode without the intermediate matrix.

    Edges use the elementwise product ``l_u * l_v``; nodes use ``l_u`` as-is.
    """
    if params is None:
        raise ValueError("decoder params are required")
    h = as_tensor(l_u)
    if l_v is not None:
        h = mul(h, as_tensor(l_v))
    single = h.ndim == 1
    if single:
        h = reshape(h, (1, h.shape[0]))
    out = _linear_stack(h, params)
    return reshape(out, (out.shape[1],)) if single else out
