"""Estimator front-ends with the familiar ``fit`` / ``predict`` surface.

All estimators are transductive over the graph they are fitted on: node
predictions refer to that graph's nodes and pair predictions to node ids of
that graph. A single ``numpy.random.Generator`` seeded from
``random_state`` drives initialization and every per-epoch draw, so equal
parameters give bit-identical models.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .autograd import ShapeError, Tape, Tensor, _softmax_np, add, concat, index, mul, reshape, transpose
from .decoder import decode, decode_mlp_ablation, edge_matrix, init_decoder, node_matrix
from .encoder import encode, init_encoder
from .graph import Graph, negative_sample, normalized_adjacency
from .losses import mse_loss, supervised_loss, total_loss
from .metrics import auprc, classification_metrics, pearson
from .mtcm import MTCM, TranslationPair, as_pairs, compute_mtcm, reconstruct, translation_graph
from .optim import Adam
from .supernode import synthesize_features
from .validation import check_graph, check_node_labels, check_positive, check_rng

logger = logging.getLogger(__name__)

FEATURE_MODES = ("identity", "supernode", "random", "given")
DTYPES = {"float64": np.float64, "float32": np.float32}


class _UGNBase(BaseEstimator):
    """Shared model plumbing: build, forward helpers, state export."""

    def _dtype(self):
        if self.precision not in DTYPES:
            raise ValueError(f"precision must be one of {tuple(DTYPES)}, got {self.precision!r}")
        return DTYPES[self.precision]

    def _validate_common(self):
        check_positive("learning_rate", self.learning_rate)
        check_positive("epochs", self.epochs, allow_zero=True)
        check_positive("latent_dim", self.latent_dim)
        if self.head_kind not in ("conv", "mlp"):
            raise ValueError(f"head_kind must be 'conv' or 'mlp', got {self.head_kind!r}")

    def _build(self, in_dim: int, n_out: int, head: str, rng=None):
        self._validate_common()
        dtype = self._dtype()
        self.rng_ = check_rng(self.random_state) if rng is None else rng
        self.encoder_ = init_encoder([in_dim, *self.hidden_dims, self.latent_dim], self.rng_, dtype)
        self.decoder_ = init_decoder(self.latent_dim, n_out, channels=self.channels,
                                     hidden=self.linear_dims, head=head, kind=self.head_kind,
                                     rng=self.rng_, dtype=dtype)
        self.optimizer_ = Adam(self.parameters(), lr=self.learning_rate)
        self.history_ = []
        self.epochs_done_ = 0

    def parameters(self) -> list:
        return self.encoder_.parameters() + self.decoder_.parameters()

    def _nodes_out(self, latents: Tensor) -> Tensor:
        if self.decoder_.kind == "mlp":
            return decode_mlp_ablation(latents, None, self.decoder_)
        return decode(node_matrix(latents), self.decoder_)

    def _pairs_out(self, latents: Tensor, pairs: np.ndarray) -> Tensor:
        lu, lv = index(latents, pairs[:, 0]), index(latents, pairs[:, 1])
        if self.decoder_.kind == "mlp":
            return decode_mlp_ablation(lu, lv, self.decoder_)
        return decode(edge_matrix(lu, lv), self.decoder_)

    def _step(self, loss_fn):
        self.optimizer_.zero_grad()
        with Tape() as tape:
            parts = loss_fn()
        total = parts["total"]
        if not np.isfinite(total.item()):
            raise FloatingPointError(
                f"non-finite loss at epoch {self.epochs_done_}: "
                + ", ".join(f"{k}={v.item()!r}" for k, v in parts.items()))
        tape.backward(total)
        self.optimizer_.step()
        return {k: v.item() for k, v in parts.items()}

    def _log_epoch(self, parts: dict):
        self.epochs_done_ += 1
        rec = {"epoch": self.epochs_done_, **parts}
        self.history_.append(rec)
        logger.debug("epoch %d: %s", self.epochs_done_, parts)

    # -- state --------------------------------------------------------------

    def get_state(self) -> dict:
        """Named arrays for every parameter and optimizer moment."""
        check_is_fitted(self, "encoder_")
        state = {}
        for i, w in enumerate(self.encoder_.weights):
            state[f"encoder.{i}"] = w.data
        for i, (k, b) in enumerate(self.decoder_.conv):
            state[f"decoder.conv.{i}.kernel"] = k.data
            state[f"decoder.conv.{i}.bias"] = b.data
        for i, (w, b) in enumerate(self.decoder_.linear):
            state[f"decoder.linear.{i}.weight"] = w.data
            state[f"decoder.linear.{i}.bias"] = b.data
        st = self.optimizer_.state
        if st.m:
            for i, (m, v) in enumerate(zip(st.m, st.v)):
                state[f"adam.m.{i}"] = m
                state[f"adam.v.{i}"] = v
        state["adam.t"] = np.array(st.t, dtype=np.int64)
        state["epochs_done"] = np.array(self.epochs_done_, dtype=np.int64)
        return state

    def set_state(self, state: dict) -> None:
        check_is_fitted(self, "encoder_")
        for name, p in self._named_params():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ShapeError(f"{name}: checkpoint has {arr.shape}, model expects {p.shape}")
            p.data[...] = arr
        st = self.optimizer_.state
        st.t = int(state["adam.t"])
        n = len(self.parameters())
        if "adam.m.0" in state:
            st.m = [np.array(state[f"adam.m.{i}"]) for i in range(n)]
            st.v = [np.array(state[f"adam.v.{i}"]) for i in range(n)]
        else:
            st.m, st.v = [], []
        self.epochs_done_ = int(state["epochs_done"])

    def _named_params(self):
        for i, w in enumerate(self.encoder_.weights):
            yield f"encoder.{i}", w
        for i, (k, b) in enumerate(self.decoder_.conv):
            yield f"decoder.conv.{i}.kernel", k
            yield f"decoder.conv.{i}.bias", b
        for i, (w, b) in enumerate(self.decoder_.linear):
            yield f"decoder.linear.{i}.weight", w
            yield f"decoder.linear.{i}.bias", b


class _GraphFeatures:
    """Feature construction shared by the graph estimators."""

    def _make_features(self, graph: Graph, rng) -> np.ndarray:
        mode = self.features
        if mode not in FEATURE_MODES:
            raise ValueError(f"features must be one of {FEATURE_MODES}, got {mode!r}")
        if mode == "identity":
            return np.eye(graph.n)
        if mode == "given":
            check_graph(graph, require_features=True)
            return np.asarray(graph.features, dtype=np.float64)
        sf = synthesize_features(graph, self.n_supernodes, self.rand_dim, rng)
        if mode == "random":
            # same width as the supernode recipe, no structural information
            return rng.uniform(0.0, 1.0, size=sf.matrix.shape)
        return sf.matrix

    def _prepare_graph(self, graph: Graph, features: Optional[np.ndarray]):
        check_graph(graph)
        dtype = self._dtype()
        a_hat = normalized_adjacency(graph, dtype)
        f = self._make_features(graph, self.rng_) if features is None else np.asarray(features)
        if f.shape[0] != graph.n:
            raise ShapeError(f"features have {f.shape[0]} rows, graph has {graph.n} nodes")
        return a_hat, Tensor(f, dtype=dtype)

    def _check_width(self, f: Tensor):
        expected = self.encoder_.dims[0]
        if f.shape[1] != expected:
            raise ShapeError(f"feature width {f.shape[1]} does not match encoder input {expected}")


class UGNNodeClassifier(_GraphFeatures, ClassifierMixin, _UGNBase):
    """Semi-supervised node classifier (community detection when only one
    node per class is labelled).

    ``fit(graph, y)`` takes one label per node with ``-1`` for unknown. The
    loss is cross-entropy on known nodes plus, unless disabled, the edge
    smoothness term over softmax outputs.
    """

    def __init__(self, hidden_dims=(32, 32), latent_dim=32, channels=(8, 16, 32),
                 linear_dims=(64, 32), head_kind="conv", use_unsupervised=True,
                 features="identity", n_supernodes=10, rand_dim=10, learning_rate=0.005,
                 epochs=200, edge_cap=14250, precision="float64", random_state=0):
        self.hidden_dims = hidden_dims
        self.latent_dim = latent_dim
        self.channels = channels
        self.linear_dims = linear_dims
        self.head_kind = head_kind
        self.use_unsupervised = use_unsupervised
        self.features = features
        self.n_supernodes = n_supernodes
        self.rand_dim = rand_dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.edge_cap = edge_cap
        self.precision = precision
        self.random_state = random_state

    def fit(self, graph: Graph, y, features=None):
        y = check_node_labels(y, graph.n)
        known = y[y >= 0]
        if known.size == 0:
            raise ValueError("no labelled nodes")
        self.classes_ = np.unique(known)
        self._build_for(graph, features)
        self.y_ = np.where(y >= 0, np.searchsorted(self.classes_, np.maximum(y, 0)), -1)
        self.partial_fit(self.epochs)
        return self

    def _build_for(self, graph, features=None):
        self.rng_ = check_rng(self.random_state)
        dtype = self._dtype()
        a_hat = normalized_adjacency(check_graph(graph), dtype)
        f = self._make_features(graph, self.rng_) if features is None else np.asarray(features)
        self.graph_ = graph
        self.a_hat_, self.features_ = a_hat, Tensor(f, dtype=dtype)
        self._build(f.shape[1], len(self.classes_), "softmax", self.rng_)

    def partial_fit(self, epochs: int = 1):
        check_is_fitted(self, "encoder_")
        edges = self.graph_.edges
        for _ in range(int(epochs)):
            def loss_fn():
                logits = self._nodes_out(encode(self.a_hat_, self.features_, self.encoder_))
                lb = total_loss(logits, self.y_, edges, self.use_unsupervised, self.edge_cap, self.rng_)
                return {"supervised": lb.supervised, "unsupervised": lb.unsupervised,
                        "total": lb.total}
            self._log_epoch(self._step(loss_fn))
        return self

    def decision_function(self, graph: Optional[Graph] = None) -> np.ndarray:
        check_is_fitted(self, "encoder_")
        a_hat, f = self.a_hat_, self.features_
        if graph is not None and graph is not self.graph_:
            if graph.n != self.graph_.n:
                raise ShapeError(f"model was fitted on {self.graph_.n} nodes, got {graph.n}")
            a_hat = normalized_adjacency(graph, self._dtype())
        self._check_width(f)
        return self._nodes_out(encode(a_hat, f, self.encoder_)).data

    def predict_proba(self, graph: Optional[Graph] = None) -> np.ndarray:
        return _softmax_np(np.asarray(self.decision_function(graph), dtype=np.float64))

    def predict(self, graph: Optional[Graph] = None) -> np.ndarray:
        return self.classes_[self.predict_proba(graph).argmax(axis=1)]

    def score(self, graph: Optional[Graph], y) -> float:
        """Accuracy over nodes whose label in ``y`` is known."""
        y = np.asarray(y)
        mask = y >= 0
        return float(np.mean(self.predict(graph)[mask] == y[mask]))


class UGNEdgeClassifier(_GraphFeatures, ClassifierMixin, _UGNBase):
    """Classifies node pairs from their intermediate image.

    ``fit(graph, pairs, labels)``: the encoder runs on ``graph``; each epoch
    draws up to ``edge_cap`` labelled pairs and trains on them in
    minibatches of ``batch_size``.
    """

    def __init__(self, hidden_dims=(32,), latent_dim=16, channels=(8, 16, 32),
                 linear_dims=(64, 32), head_kind="conv", features="supernode", n_supernodes=10,
                 rand_dim=10, learning_rate=0.005, epochs=50, batch_size=64, edge_cap=14250,
                 precision="float64", random_state=0):
        self.hidden_dims = hidden_dims
        self.latent_dim = latent_dim
        self.channels = channels
        self.linear_dims = linear_dims
        self.head_kind = head_kind
        self.features = features
        self.n_supernodes = n_supernodes
        self.rand_dim = rand_dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.edge_cap = edge_cap
        self.precision = precision
        self.random_state = random_state

    def fit(self, graph: Graph, pairs, labels, features=None):
        pairs = _check_pairs(pairs, graph.n)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (len(pairs),):
            raise ValueError(f"{len(labels)} labels for {len(pairs)} pairs")
        self.classes_ = np.unique(labels)
        self._setup(graph, features, len(self.classes_))
        self.pairs_, self.labels_ = pairs, np.searchsorted(self.classes_, labels)
        self.partial_fit(self.epochs)
        return self

    def _setup(self, graph, features, n_out):
        self.rng_ = check_rng(self.random_state)
        a_hat, f = self._prepare_graph(graph, features)
        self.graph_, self.a_hat_, self.features_ = graph, a_hat, f
        self._build(f.shape[1], n_out, "softmax", self.rng_)
        check_positive("batch_size", self.batch_size)

    def _epoch_samples(self):
        idx = np.arange(len(self.pairs_))
        if self.edge_cap is not None and len(idx) > self.edge_cap:
            idx = np.sort(self.rng_.choice(idx, size=self.edge_cap, replace=False))
        return self.pairs_[idx], self.labels_[idx]

    def partial_fit(self, epochs: int = 1):
        check_is_fitted(self, "encoder_")
        for _ in range(int(epochs)):
            pairs, labels = self._epoch_samples()
            order = self.rng_.permutation(len(pairs))
            sums, batches = {}, 0
            for b in range(0, len(order), self.batch_size):
                sel = order[b:b + self.batch_size]

                def loss_fn():
                    lat = encode(self.a_hat_, self.features_, self.encoder_)
                    ls = supervised_loss(self._pairs_out(lat, pairs[sel]), labels[sel],
                                         len(self.classes_))
                    return {"supervised": ls, "total": ls}
                for k, v in self._step(loss_fn).items():
                    sums[k] = sums.get(k, 0.0) + v
                batches += 1
            self._log_epoch({k: v / max(batches, 1) for k, v in sums.items()})
        return self

    def decision_function(self, pairs) -> np.ndarray:
        check_is_fitted(self, "encoder_")
        pairs = _check_pairs(pairs, self.graph_.n)
        self._check_width(self.features_)
        lat = encode(self.a_hat_, self.features_, self.encoder_)
        out = []
        for b in range(0, len(pairs), 512):
            out.append(self._pairs_out(lat, pairs[b:b + 512]).data)
        return np.concatenate(out) if out else np.zeros((0, len(self.classes_)))

    def predict_proba(self, pairs) -> np.ndarray:
        return _softmax_np(np.asarray(self.decision_function(pairs), dtype=np.float64))

    def predict(self, pairs) -> np.ndarray:
        return self.classes_[self.predict_proba(pairs).argmax(axis=1)]

    def score(self, pairs, labels) -> float:
        return classification_metrics(self.predict(pairs), labels)["accuracy"]


class UGNLinkPredictor(UGNEdgeClassifier):
    """Binary link prediction with fresh balanced negatives every epoch.

    ``fit(graph)`` treats the graph's edges as positives. ``exclude`` pairs
    (e.g. held-out positives) are never drawn as negatives.
    """

    def __init__(self, hidden_dims=(32,), latent_dim=16, channels=(8, 16, 32),
                 linear_dims=(64, 32), head_kind="conv", features="supernode", n_supernodes=10,
                 rand_dim=10, learning_rate=0.005, epochs=50, batch_size=64, edge_cap=14250,
                 neg_ratio=1.0, precision="float64", random_state=0):
        super().__init__(hidden_dims, latent_dim, channels, linear_dims, head_kind, features,
                         n_supernodes, rand_dim, learning_rate, epochs, batch_size, edge_cap,
                         precision, random_state)
        self.neg_ratio = neg_ratio

    def fit(self, graph: Graph, exclude=None, features=None):
        check_positive("neg_ratio", self.neg_ratio, allow_zero=True)
        self.classes_ = np.array([0, 1])
        self._setup(graph, features, 2)
        self.pairs_ = graph.edges
        self.labels_ = np.ones(len(graph.edges), dtype=np.int64)
        self.exclude_ = None if exclude is None else {tuple(map(int, p)) for p in np.asarray(exclude).reshape(-1, 2)}
        self.partial_fit(self.epochs)
        return self

    def _epoch_samples(self):
        pos, _ = super()._epoch_samples()
        n_neg = int(round(self.neg_ratio * len(pos)))
        neg = negative_sample(self.graph_, n_neg, self.rng_, exclude=self.exclude_)
        pairs = np.concatenate([pos, neg])
        labels = np.r_[np.ones(len(pos), np.int64), np.zeros(len(neg), np.int64)]
        return pairs, labels

    def predict_proba(self, pairs) -> np.ndarray:
        """Probability that each pair is a link."""
        return super().predict_proba(pairs)[:, 1]

    def predict(self, pairs) -> np.ndarray:
        return (self.predict_proba(pairs) > 0.5).astype(np.int64)

    def score(self, pairs, labels) -> float:
        """AUPRC of the link probabilities."""
        return auprc(self.predict_proba(pairs), labels)


class UGNTranslator(RegressorMixin, _UGNBase):
    """Connectivity-matrix translation ``S -> T``.

    With ``use_mtcm`` the model regresses ``T - mean(T_train)`` and adds the
    mean back at prediction time. Each row of the output matrix is the
    decoder's regression of one node's image; rows are symmetrized.
    """

    def __init__(self, hidden_dims=(64,), latent_dim=32, channels=(8, 16, 32),
                 linear_dims=(64, 32), head_kind="conv", use_mtcm=True, k_neighbors=4,
                 learning_rate=0.005, epochs=100, batch_size=10, precision="float64",
                 random_state=0):
        self.hidden_dims = hidden_dims
        self.latent_dim = latent_dim
        self.channels = channels
        self.linear_dims = linear_dims
        self.head_kind = head_kind
        self.use_mtcm = use_mtcm
        self.k_neighbors = k_neighbors
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.precision = precision
        self.random_state = random_state

    def fit(self, pairs: Sequence[TranslationPair], y=None):
        pairs = as_pairs(pairs)
        if not pairs:
            raise ValueError("no training pairs")
        order = pairs[0].order
        if any(p.order != order for p in pairs):
            raise ValueError("all pairs must share one matrix order")
        check_positive("batch_size", self.batch_size)
        self.order_ = order
        targets = np.array([p.target for p in pairs])
        self.mtcm_ = compute_mtcm(targets) if self.use_mtcm else MTCM(np.zeros((order, order)), 0)
        self._build(order, order, "identity")
        self.sources_ = np.array([p.source for p in pairs])
        self.diffs_ = targets - self.mtcm_.mean
        self.a_hats_ = [self._a_hat(s) for s in self.sources_]
        self.partial_fit(self.epochs)
        return self

    def _a_hat(self, s):
        return normalized_adjacency(translation_graph(s, self.k_neighbors), self._dtype())

    def _forward(self, sources, a_hats) -> Tensor:
        dtype = self._dtype()
        lat = concat([encode(a, Tensor(s, dtype=dtype), self.encoder_)
                      for s, a in zip(sources, a_hats)], axis=0)
        rows = reshape(self._nodes_out(lat), (len(sources), self.order_, self.order_))
        return mul(add(rows, transpose(rows, (0, 2, 1))), 0.5)

    def partial_fit(self, epochs: int = 1):
        check_is_fitted(self, "encoder_")
        n = len(self.sources_)
        for _ in range(int(epochs)):
            order = self.rng_.permutation(n)
            total, batches = 0.0, 0
            for b in range(0, n, self.batch_size):
                sel = order[b:b + self.batch_size]

                def loss_fn():
                    pred = self._forward(self.sources_[sel], [self.a_hats_[i] for i in sel])
                    loss = mse_loss(pred, self.diffs_[sel])
                    return {"supervised": loss, "total": loss}
                total += self._step(loss_fn)["total"]
                batches += 1
            self._log_epoch({"supervised": total / batches, "total": total / batches})
        return self

    def predict(self, sources) -> np.ndarray:
        """Reconstructed target matrices, shape ``(B, N, N)``."""
        check_is_fitted(self, "encoder_")
        sources = np.asarray([p.source if isinstance(p, TranslationPair) else p for p in sources],
                             dtype=np.float64)
        if sources.ndim != 3 or sources.shape[1:] != (self.order_, self.order_):
            raise ShapeError(f"expected sources of shape (B, {self.order_}, {self.order_}), "
                             f"got {sources.shape}")
        out = []
        for b in range(0, len(sources), 25):
            chunk = sources[b:b + 25]
            diff = self._forward(chunk, [self._a_hat(s) for s in chunk]).data
            out.extend(reconstruct(d, self.mtcm_) for d in diff)
        return np.array(out)

    def score(self, pairs, y=None) -> float:
        """Median Pearson correlation over the given pairs."""
        pairs = as_pairs(pairs)
        pred = self.predict([p.source for p in pairs])
        return float(np.median([pearson(p, q.target) for p, q in zip(pred, pairs)]))

    def get_state(self) -> dict:
        state = super().get_state()
        state["mtcm"] = self.mtcm_.mean
        return state

    def set_state(self, state: dict) -> None:
        super().set_state(state)
        self.mtcm_ = MTCM(np.array(state["mtcm"]), self.mtcm_.sample_count)


def _check_pairs(pairs, n: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise IndexError(f"pair node id outside [0, {n})")
    return pairs
