"""Run configuration, data resolution, the training loop and checkpoints.

A run is fully described by a flat ``key=value`` config plus its seed.
Checkpoints are plain text and written deterministically, so two runs with
the same config produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .autograd import ShapeError
from .datasets import (FormatError, generate_sbm, generate_translation_pairs, load_edge_list,
                       load_fixture, load_labels, load_matrix_pairs, load_triples)
from .estimators import UGNEdgeClassifier, UGNLinkPredictor, UGNNodeClassifier, UGNTranslator
from .graph import UNKNOWN, Graph, build_graph, negative_sample
from .metrics import MetricReport, auprc, classification_metrics, hits_at_1, pearson
from .tasks import N_RELATIONS, few_shot_subsample, yago_entity_features
from .validation import check_rng

logger = logging.getLogger(__name__)

TASKS = ("community", "node-class", "link-pred", "edge-class", "kg-completion", "translation")
FORMAT_TAG = "ugn-checkpoint\t1"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    task: str = "community"
    data: str = "fixture:karate"
    labels: str = ""
    hidden_dims: tuple = (32, 32)
    latent_dim: int = 32
    channels: tuple = (8, 16, 32)
    linear_dims: tuple = (64, 32)
    learning_rate: float = 0.005
    epochs: int = 200
    batch_size: int = 64
    edge_cap: int = 14250
    neg_ratio: float = 1.0
    test_fraction: float = 0.2
    labels_per_class: int = 1
    train_count: int = 200
    features: str = "identity"
    n_supernodes: int = 10
    rand_dim: int = 10
    k_neighbors: int = 4
    few_shot_cap: int = 0
    patience: int = 0
    seed: int = 0
    data_seed: int = -1
    precision: str = "float64"
    no_intermediate_matrix: bool = False
    mlp_head: bool = False
    no_supernode: bool = False
    no_mtcm: bool = False
    no_unsup_loss: bool = False

    # -- parsing --------------------------------------------------------------

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        cfg = cls()
        for k, v in values.items():
            cfg.set(k, v)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
                k, v = line.split("=", 1)
                values[k.strip()] = v.strip()
        return cls.from_dict(values)

    def set(self, key: str, value) -> None:
        key = key.strip().replace("-", "_")
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigError(key, "unknown config key")
        setattr(self, key, _coerce(key, types[key], value))

    def with_overrides(self, pairs) -> "RunConfig":
        cfg = dataclasses.replace(self)
        for item in pairs or ():
            if "=" not in item:
                raise ConfigError(item, "override must look like key=value")
            k, v = item.split("=", 1)
            cfg.set(k, v)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError("task", f"must be one of {TASKS}, got {self.task!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate", f"must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError("epochs", f"must be >= 0, got {self.epochs}")
        for name in ("latent_dim", "batch_size", "edge_cap", "labels_per_class", "train_count",
                     "n_supernodes", "k_neighbors"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        for name in ("rand_dim", "few_shot_cap", "patience"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if self.neg_ratio < 0:
            raise ConfigError("neg_ratio", f"must be >= 0, got {self.neg_ratio}")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("test_fraction", f"must be in [0, 1), got {self.test_fraction}")
        if self.precision not in ("float64", "float32"):
            raise ConfigError("precision", f"must be float64 or float32, got {self.precision!r}")
        if self.features not in ("identity", "supernode", "random", "given"):
            raise ConfigError("features", f"unknown feature mode {self.features!r}")
        if any(d < 1 for d in self.hidden_dims + self.channels + self.linear_dims):
            raise ConfigError("hidden_dims/channels/linear_dims", "widths must be >= 1")
        if not self.data:
            raise ConfigError("data", "no data source given")

    def to_text(self) -> str:
        return "".join(f"{f.name}={_render(getattr(self, f.name))}\n" for f in fields(self))

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @property
    def effective_data_seed(self) -> int:
        return self.seed if self.data_seed < 0 else self.data_seed


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key: str, typ, value):
    typ = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    try:
        if typ == "bool":
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if typ == "float":
            return float(value)
        if typ == "tuple":
            if isinstance(value, (tuple, list)):
                return tuple(int(x) for x in value)
            s = str(value).strip()
            return tuple(int(x) for x in s.split(",") if x.strip()) if s else ()
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot read {value!r} as {typ}") from None


# -- data ------------------------------------------------------------------------

@dataclass
class TaskData:
    """Everything a task needs; ``train`` and ``test`` hold task-specific parts."""

    task: str
    graph: Optional[Graph] = None
    train: dict = field(default_factory=dict)
    test: dict = field(default_factory=dict)


def _kv(text: str) -> dict:
    out = {}
    for tok in filter(None, text.split(",")):
        if "=" not in tok:
            raise ConfigError("data", f"expected name=value in {text!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = float(v) if any(c in v for c in ".e") else int(v)
    return out


def _load_graph(cfg: RunConfig) -> Graph:
    src = cfg.data
    if src.startswith("fixture:"):
        return load_fixture(src.split(":", 1)[1])
    if src.startswith("sbm:"):
        p = _kv(src[4:])
        try:
            return generate_sbm(int(p["n"]), int(p["communities"]), p["p_in"], p["p_out"],
                                rng=cfg.effective_data_seed)
        except KeyError as exc:
            raise ConfigError("data", f"sbm data string is missing {exc}") from None
    g = load_edge_list(src)
    if cfg.labels:
        g = g.with_labels(load_labels(cfg.labels, g.n))
    return g


def _labelled_nodes(g: Graph, per_class: int) -> np.ndarray:
    """Training labels: the ``per_class`` highest-degree nodes of each class."""
    y = np.asarray(g.node_labels)
    deg = g.adjacency(symmetric=True).sum(axis=1)
    train = np.full(g.n, UNKNOWN, dtype=np.int64)
    for c in np.unique(y[y >= 0]):
        idx = np.flatnonzero(y == c)
        top = idx[np.lexsort((idx, -deg[idx]))][:per_class]
        train[top] = c
    return train


def _split(n: int, test_fraction: float, rng) -> tuple:
    perm = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def load_task_data(cfg: RunConfig) -> TaskData:
    rng = check_rng(cfg.effective_data_seed)
    if cfg.task in ("community", "node-class"):
        g = _load_graph(cfg)
        if g.node_labels is None:
            raise ConfigError("labels", "node tasks need ground-truth labels")
        y = np.asarray(g.node_labels)
        if cfg.task == "community":
            train = _labelled_nodes(g, cfg.labels_per_class)
        else:
            known = np.flatnonzero(y >= 0)
            tr, _ = _split(len(known), cfg.test_fraction, rng)
            train = np.full(g.n, UNKNOWN, dtype=np.int64)
            train[known[tr]] = y[known[tr]]
        return TaskData(cfg.task, g, {"y": train}, {"y": y, "train_mask": train >= 0})
    if cfg.task in ("link-pred", "edge-class"):
        g = _load_graph(cfg)
        tr, te = _split(g.n_edges, cfg.test_fraction, rng)
        labels = g.edge_labels
        train_g = build_graph(g.n, g.edges[tr], g.directed,
                              edge_labels=None if labels is None else labels[tr])
        if cfg.task == "edge-class":
            if labels is None:
                raise ConfigError("data", "edge-class needs an edge list with labels")
            return TaskData(cfg.task, train_g, {"pairs": g.edges[tr], "labels": labels[tr]},
                            {"pairs": g.edges[te], "labels": labels[te]})
        neg = negative_sample(g, int(round(cfg.neg_ratio * len(te))), rng)
        pairs = np.concatenate([g.edges[te], neg])
        y = np.r_[np.ones(len(te), np.int64), np.zeros(len(neg), np.int64)]
        return TaskData(cfg.task, train_g, {"exclude": g.edges[te]}, {"pairs": pairs, "labels": y})
    if cfg.task == "kg-completion":
        triples, vocab = load_triples(cfg.data, cfg.data + ".vocab" if os.path.exists(cfg.data + ".vocab") else None)
        n = len(vocab.entities)
        tr, te = _split(len(triples), cfg.test_fraction, rng)
        train_t = triples[tr]
        if cfg.few_shot_cap:
            train_t = few_shot_subsample(train_t, cfg.few_shot_cap, rng)
        g = build_graph(n, triples[tr][:, [0, 2]], directed=True)
        feats = yago_entity_features(triples[tr], n, cfg.rand_dim, rng, n_relations=max(
            N_RELATIONS, len(vocab.relations)))
        g = g.with_features(feats)
        return TaskData(cfg.task, g, {"pairs": train_t[:, [0, 2]], "labels": train_t[:, 1]},
                        {"pairs": triples[te][:, [0, 2]], "labels": triples[te][:, 1]})
    # translation
    if cfg.data.startswith("translate:"):
        p = _kv(cfg.data[len("translate:"):])
        order, count = int(p.pop("order", 32)), int(p.pop("count", 250))
        pairs = generate_translation_pairs(order, count, rng=rng, **p)
    else:
        pairs = load_matrix_pairs(cfg.data)
    if cfg.train_count >= len(pairs):
        raise ConfigError("train_count", f"{cfg.train_count} leaves no test pairs out of {len(pairs)}")
    return TaskData(cfg.task, None, {"pairs": pairs[:cfg.train_count]},
                    {"pairs": pairs[cfg.train_count:]})


# -- estimators --------------------------------------------------------------------

def build_estimator(cfg: RunConfig, epochs: Optional[int] = None):
    head = "mlp" if (cfg.mlp_head or cfg.no_intermediate_matrix) else "conv"
    common = dict(hidden_dims=cfg.hidden_dims, latent_dim=cfg.latent_dim, channels=cfg.channels,
                  linear_dims=cfg.linear_dims, head_kind=head, learning_rate=cfg.learning_rate,
                  epochs=cfg.epochs if epochs is None else epochs, precision=cfg.precision,
                  random_state=cfg.seed)
    features = "random" if (cfg.no_supernode and cfg.features == "supernode") else cfg.features
    if cfg.task in ("community", "node-class"):
        return UGNNodeClassifier(use_unsupervised=not cfg.no_unsup_loss, features=features,
                                 n_supernodes=cfg.n_supernodes, rand_dim=cfg.rand_dim,
                                 edge_cap=cfg.edge_cap, **common)
    if cfg.task == "link-pred":
        return UGNLinkPredictor(features=features, n_supernodes=cfg.n_supernodes,
                                rand_dim=cfg.rand_dim, batch_size=cfg.batch_size,
                                edge_cap=cfg.edge_cap, neg_ratio=cfg.neg_ratio, **common)
    if cfg.task in ("edge-class", "kg-completion"):
        feats = "given" if cfg.task == "kg-completion" else features
        return UGNEdgeClassifier(features=feats, n_supernodes=cfg.n_supernodes,
                                 rand_dim=cfg.rand_dim, batch_size=cfg.batch_size,
                                 edge_cap=cfg.edge_cap, **common)
    return UGNTranslator(use_mtcm=not cfg.no_mtcm, k_neighbors=cfg.k_neighbors,
                         batch_size=cfg.batch_size, **common)


def _fit(est, data: TaskData):
    t = data.task
    if t in ("community", "node-class"):
        return est.fit(data.graph, data.train["y"])
    if t == "link-pred":
        return est.fit(data.graph, exclude=data.train["exclude"])
    if t in ("edge-class", "kg-completion"):
        return est.fit(data.graph, data.train["pairs"], data.train["labels"])
    return est.fit(data.train["pairs"])


def score(est, data: TaskData, seed: Optional[int] = None) -> MetricReport:
    """Held-out metrics for a fitted estimator (pure inference)."""
    t = data.task
    if t in ("community", "node-class"):
        y = data.test["y"]
        pred = est.predict(data.graph)
        known = y >= 0
        rep = classification_metrics(pred[known], y[known])
        unl = known & ~data.test["train_mask"]
        rep.values["accuracy_unlabelled"] = float(np.mean(pred[unl] == y[unl])) if unl.any() else 1.0
    elif t == "link-pred":
        pairs, y = data.test["pairs"], data.test["labels"]
        prob = est.predict_proba(pairs)
        rep = classification_metrics((prob > 0.5).astype(np.int64), y)
        rep.values = {"auprc": auprc(prob, y), **rep.values}
    elif t == "edge-class":
        rep = classification_metrics(est.predict(data.test["pairs"]), data.test["labels"])
    elif t == "kg-completion":
        pred = est.predict(data.test["pairs"])
        rep = MetricReport({"hits_at_1": hits_at_1(pred, data.test["labels"])},
                           {"queries": len(pred)})
    else:
        pairs = data.test["pairs"]
        pred = est.predict([p.source for p in pairs])
        rs = [pearson(p, q.target) for p, q in zip(pred, pairs)]
        mse = [float(np.mean((p - q.target) ** 2)) for p, q in zip(pred, pairs)]
        rep = MetricReport({"pearson": float(np.median(rs)), "pearson_mean": float(np.mean(rs)),
                            "mse": float(np.mean(mse))}, {"samples": len(pairs)})
    rep.seed = seed
    return rep


# -- checkpoints -------------------------------------------------------------------

@dataclass
class Checkpoint:
    config: RunConfig
    arrays: dict
    epoch: int

    @property
    def config_hash(self) -> str:
        return self.config.hash()

    def to_text(self) -> str:
        lines = [FORMAT_TAG, f"config_hash\t{self.config_hash}", f"epoch\t{self.epoch}"]
        lines += [f"config\t{line}" for line in self.config.to_text().splitlines()]
        for name in sorted(self.arrays):
            a = np.asarray(self.arrays[name])
            shape = ",".join(str(s) for s in a.shape)
            lines.append(f"array\t{name}\t{a.dtype.str}\t{shape}")
            if a.dtype.kind == "f":
                lines.append(" ".join(repr(float(x)) for x in a.ravel()))
            else:
                lines.append(" ".join(str(int(x)) for x in a.ravel()))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> "Checkpoint":
        lines = text.split("\n")
        if not lines or lines[0] != FORMAT_TAG:
            raise FormatError(f"{source}:1: not a checkpoint file")
        cfg_values, arrays, header = {}, {}, {}
        i = 1
        while i < len(lines) and lines[i]:
            parts = lines[i].split("\t")
            if parts[0] == "config":
                k, v = parts[1].split("=", 1)
                cfg_values[k] = v
            elif parts[0] == "array":
                _, name, dtype, shape = parts
                dims = tuple(int(s) for s in shape.split(",") if s)
                raw = lines[i + 1].split() if lines[i + 1] else []
                arrays[name] = np.array(raw, dtype=np.float64 if np.dtype(dtype).kind == "f" else np.int64
                                        ).astype(dtype).reshape(dims)
                i += 1
            else:
                header[parts[0]] = parts[1]
            i += 1
        cfg = RunConfig.from_dict(cfg_values)
        if header.get("config_hash") != cfg.hash():
            raise FormatError(f"{source}: config hash mismatch; file was edited or is corrupt")
        return cls(cfg, arrays, int(header["epoch"]))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), str(path))


# -- loops ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list
    report: MetricReport
    estimator: object


def train(cfg: RunConfig, out_dir=None, data: Optional[TaskData] = None) -> TrainResult:
    """Fit per ``cfg``; one loss record per epoch, then held-out metrics."""
    cfg.validate()
    data = data or load_task_data(cfg)
    est = _fit(build_estimator(cfg, epochs=0), data)
    best, stale = np.inf, 0
    for _ in range(cfg.epochs):
        est.partial_fit(1)
        rec = est.history_[-1]
        logger.info("epoch %d %s", rec["epoch"],
                    " ".join(f"{k}={v:.6g}" for k, v in rec.items() if k != "epoch"))
        if cfg.patience:
            if rec["total"] < best - 1e-12:
                best, stale = rec["total"], 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    report = score(est, data, cfg.seed)
    ckpt = Checkpoint(cfg, est.get_state(), est.epochs_done_)
    if out_dir is not None:
        write_run(out_dir, cfg, ckpt, est.history_, report)
    return TrainResult(ckpt, est.history_, report, est)


def restore(ckpt: Checkpoint, data: Optional[TaskData] = None):
    """Rebuild the estimator stored in ``ckpt`` (no training)."""
    data = data or load_task_data(ckpt.config)
    est = _fit(build_estimator(ckpt.config, epochs=0), data)
    est.set_state(ckpt.arrays)
    return est, data


def evaluate(ckpt: Checkpoint, data_path: Optional[str] = None) -> MetricReport:
    """Metrics of a saved model, optionally on another data source of the same shape."""
    cfg = ckpt.config
    if data_path:
        cfg = cfg.with_overrides([f"data={data_path}"])
    data = load_task_data(cfg)
    try:
        est, data = restore(Checkpoint(cfg, ckpt.arrays, ckpt.epoch), data)
    except ShapeError as exc:
        raise ShapeError(f"checkpoint does not fit data {cfg.data!r}: {exc}") from None
    return score(est, data, cfg.seed)


def write_run(out_dir, cfg: RunConfig, ckpt: Checkpoint, history: list, report: MetricReport):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    ckpt.save(out / "checkpoint.txt")
    (out / "metrics.txt").write_text(report.to_text(), encoding="utf-8")
    keys = sorted({k for rec in history for k in rec if k != "epoch"})
    rows = ["epoch\t" + "\t".join(keys)]
    rows += [f"{rec['epoch']}\t" + "\t".join(repr(float(rec.get(k, 0.0))) for k in keys) for rec in history]
    (out / "history.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
