"""Input validation helpers shared by the estimators and pipelines."""

from __future__ import annotations

import numbers

import numpy as np


def check_rng(seed=None) -> np.random.Generator:
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    Accepts ``None`` (fresh entropy), an int, or an existing Generator, which
    is returned unchanged so callers can share one stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.integer)):
        return np.random.default_rng(seed)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a random generator from {seed!r}")


def check_graph(graph, require_features: bool = False):
    from .graph import Graph

    if not isinstance(graph, Graph):
        raise TypeError(f"expected a Graph, got {type(graph).__name__}")
    if require_features and graph.features is None:
        raise ValueError("graph has no node features")
    if graph.features is not None:
        f = graph.features
        if f.ndim != 2 or f.shape[0] != graph.n:
            raise ValueError(f"features must be ({graph.n}, C), got {f.shape}")
        if not np.isfinite(f).all():
            raise ValueError("features contain NaN or Inf")
    return graph


def check_node_labels(y, n: int, unknown: int = -1) -> np.ndarray:
    """Integer label vector of length ``n``; ``unknown`` marks hidden labels."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} node labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integers")
        y = y.astype(np.int64)
    if ((y < 0) & (y != unknown)).any():
        raise ValueError("negative label that is not the unknown sentinel")
    return y.astype(np.int64)


def check_positive(name: str, value, allow_zero: bool = False):
    if value is None or (value < 0 if allow_zero else value <= 0):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_square(name: str, m, symmetric_tol: float | None = None) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if symmetric_tol is not None and not np.allclose(m, m.T, atol=symmetric_tol, rtol=0):
        raise ValueError(f"{name} is not symmetric within {symmetric_tol}")
    return m
