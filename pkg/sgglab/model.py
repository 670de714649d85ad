"""
Minimal trainable scene-graph classifier.

Two linear softmax heads over synthetic features: a node head over
object classes and an edge head over 1 + C_pred outputs (column 0 = BG).
An optional frequency bias adds log P(R|s,o) to the non-BG edge logits.
Gradients are derived by hand; grad_check verifies them against central
differences. Training is plain SGD under any LossConfig, with optional
per-batch edge subsampling.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp, softmax

from .core import Batch, EdgeKey, SceneGraph, all_pairs, make_batch, num_pairs, pair_index
from .freq import FreqModel, triplet_counts
from .losses import (
    EdgeLossTerms,
    LossConfig,
    LossValue,
    compute_loss,
    per_edge_weights,
    terms_from_losses,
)
from .metrics import Prediction, Task, recall_suite
from .utils.exceptions import (
    ConfigurationError,
    DegenerateInputError,
    DimensionMismatchError,
    NonFiniteGradientError,
)
from .utils.logger import log_execution_time

logger = logging.getLogger("sgglab.model")

PARAMETER_NAMES = ("node_W", "node_b", "edge_W", "edge_b")

HISTORY_COLUMNS = [
    "epoch", "l_node", "l_fg", "l_bg", "d", "total",
    "m_fg", "m_bg", "batches", "skipped_batches",
]

__all__ = [
    "ClassifierModel",
    "EdgeSample",
    "FeatureBundle",
    "Task",
    "TrainConfig",
    "forward",
    "grad_check",
    "init_model",
    "loss_and_gradients",
    "predict_dataset",
    "sample_edges",
    "sgd_step",
    "train",
]


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    """
    Features of one graph.

    Attributes:
        graph_id: Graph identifier
        node_features: [N, D_v]
        edge_features: [N(N-1), D_e], rows in canonical pair order
    """

    graph_id: str
    node_features: np.ndarray
    edge_features: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.node_features, dtype=float)
        edges = np.asarray(self.edge_features, dtype=float)
        if nodes.ndim == 1 and nodes.size == 0:
            nodes = nodes.reshape(0, 0)
        if edges.ndim == 1 and edges.size == 0:
            edges = edges.reshape(0, 0)
        if nodes.ndim != 2 or edges.ndim != 2:
            raise DimensionMismatchError(f"Features of {self.graph_id!r} must be 2-D arrays")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(edges))):
            raise DimensionMismatchError(f"Features of {self.graph_id!r} contain non-finite values")
        object.__setattr__(self, "node_features", nodes)
        object.__setattr__(self, "edge_features", edges)

    @property
    def node_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.edge_features.shape[1]

    def edge_row(self, n: int, i: int, j: int) -> np.ndarray:
        return self.edge_features[pair_index(n, i, j)]


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """
    Linear node and edge heads.

    Attributes:
        node_W: [D_v, C_obj]
        node_b: [C_obj]
        edge_W: [D_e, 1 + C_pred], column 0 = BG
        edge_b: [1 + C_pred]
        freq_bias: Frequency model whose log-probabilities are added to non-BG logits
        rng_seed: Seed the weights were drawn with
    """

    node_W: np.ndarray
    node_b: np.ndarray
    edge_W: np.ndarray
    edge_b: np.ndarray
    freq_bias: Optional[FreqModel] = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in PARAMETER_NAMES:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.node_W.ndim != 2 or self.edge_W.ndim != 2:
            raise DimensionMismatchError("Weight matrices must be 2-D")
        if self.node_b.shape != (self.node_W.shape[1],):
            raise DimensionMismatchError(f"node_b shape {self.node_b.shape} does not match node_W {self.node_W.shape}")
        if self.edge_b.shape != (self.edge_W.shape[1],):
            raise DimensionMismatchError(f"edge_b shape {self.edge_b.shape} does not match edge_W {self.edge_W.shape}")
        if self.edge_W.shape[1] < 2:
            raise DimensionMismatchError("Edge head needs BG plus at least one predicate output")
        if self.freq_bias is not None:
            if self.freq_bias.num_predicates != self.c_pred:
                raise DimensionMismatchError(
                    f"Frequency bias has {self.freq_bias.num_predicates} predicates, model has {self.c_pred}"
                )
            if self.freq_bias.smoothing <= 0:
                raise ConfigurationError("Frequency bias needs smoothing > 0")

    @property
    def d_v(self) -> int:
        return self.node_W.shape[0]

    @property
    def d_e(self) -> int:
        return self.edge_W.shape[0]

    @property
    def c_obj(self) -> int:
        return self.node_W.shape[1]

    @property
    def c_pred(self) -> int:
        return self.edge_W.shape[1] - 1

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    @cached_property
    def freq_log_prior(self) -> Optional[np.ndarray]:
        if self.freq_bias is None:
            return None
        return self.freq_bias.log_prior(self.c_obj)


def init_model(
    d_v: int,
    d_e: int,
    c_obj: int,
    c_pred: int,
    seed: int = 0,
    freq_bias: Optional[FreqModel] = None,
) -> ClassifierModel:
    """Weights uniform in [-0.01, 0.01] from a seeded generator; biases zero."""
    rng = np.random.default_rng(seed)
    return ClassifierModel(
        node_W=rng.uniform(-0.01, 0.01, size=(d_v, c_obj)),
        node_b=np.zeros(c_obj),
        edge_W=rng.uniform(-0.01, 0.01, size=(d_e, 1 + c_pred)),
        edge_b=np.zeros(1 + c_pred),
        freq_bias=freq_bias,
        rng_seed=int(seed),
    )


def _check_features(model: ClassifierModel, graph: SceneGraph, feats: FeatureBundle) -> None:
    n = graph.num_nodes
    if feats.node_features.shape != (n, model.d_v):
        raise DimensionMismatchError(
            f"Graph {graph.graph_id!r}: node features {feats.node_features.shape}, expected {(n, model.d_v)}"
        )
    pairs = num_pairs(n)
    if pairs and feats.edge_features.shape != (pairs, model.d_e):
        raise DimensionMismatchError(
            f"Graph {graph.graph_id!r}: edge features {feats.edge_features.shape}, expected {(pairs, model.d_e)}"
        )
    if max(graph.nodes) >= model.c_obj:
        raise DimensionMismatchError(f"Graph {graph.graph_id!r}: object class beyond C_obj={model.c_obj}")
    if any(p > model.c_pred for _, _, p in graph.fg_edges):
        raise DimensionMismatchError(f"Graph {graph.graph_id!r}: predicate beyond C_pred={model.c_pred}")


def _edge_logits(
    edge_W: np.ndarray,
    edge_b: np.ndarray,
    prior: Optional[np.ndarray],
    features: np.ndarray,
    subj_labels: np.ndarray,
    obj_labels: np.ndarray,
) -> np.ndarray:
    if features.shape[0] == 0:
        return np.zeros((0, edge_b.shape[0]))
    logits = features @ edge_W + edge_b
    if prior is not None:
        logits = logits + prior[subj_labels, obj_labels]
    return logits


def forward(
    model: ClassifierModel,
    graph: SceneGraph,
    feats: FeatureBundle,
    task: Task = Task.PREDCLS,
) -> Prediction:
    """
    Predict node and pair distributions for one graph.

    PredCls node distributions are one-hot on ground truth. With a
    frequency bias, (s, o) for the prior come from ground-truth labels in
    PredCls and argmax node predictions in SGCls.

    Raises:
        DimensionMismatchError: When features or labels do not fit the model
    """
    task = Task.parse(task)
    _check_features(model, graph, feats)
    n = graph.num_nodes

    if task is Task.PREDCLS:
        labels = np.asarray(graph.nodes, dtype=np.int64)
        node_probs = np.eye(model.c_obj)[labels]
    else:
        node_probs = softmax(feats.node_features @ model.node_W + model.node_b, axis=1)
        labels = node_probs.argmax(axis=1)

    pairs = all_pairs(n)
    subj = np.asarray([i for i, _ in pairs], dtype=np.int64)
    obj = np.asarray([j for _, j in pairs], dtype=np.int64)
    logits = _edge_logits(
        model.edge_W, model.edge_b, model.freq_log_prior,
        feats.edge_features, labels[subj] if pairs else subj, labels[obj] if pairs else obj,
    )
    pair_probs = softmax(logits, axis=1) if pairs else logits
    return Prediction(graph.graph_id, node_probs, tuple(pairs), pair_probs)


def predict_dataset(
    model: ClassifierModel,
    graphs: Sequence[SceneGraph],
    features: Mapping[str, FeatureBundle],
    task: Task = Task.PREDCLS,
) -> Dict[str, Prediction]:
    """forward over a dataset, keyed by graph_id in dataset order."""
    return {g.graph_id: forward(model, g, _features_for(features, g), task) for g in graphs}


@dataclass(frozen=True)
class EdgeSample:
    """Subsampled edge view of a batch; density is recomputed on the sample."""

    batch: Batch
    fg_keys: Tuple[EdgeKey, ...]
    bg_keys: Tuple[EdgeKey, ...]

    @property
    def m_fg(self) -> int:
        return len(self.fg_keys)

    @property
    def m_bg(self) -> int:
        return len(self.bg_keys)

    @property
    def density(self) -> Optional[float]:
        total = self.m_fg + self.m_bg
        return self.m_fg / total if total else None


def sample_edges(batch: Batch, max_fg: int, max_bg: int, seed: int) -> EdgeSample:
    """
    Uniformly sample at most max_fg FG edges and max_bg BG pairs without replacement.

    Selections keep batch order and are deterministic given seed; caps
    above availability keep everything.

    Raises:
        ConfigurationError: When a cap is below 1
    """
    if max_fg < 1 or max_bg < 1:
        raise ConfigurationError(f"Edge sampling caps must be >= 1, got {max_fg}:{max_bg}")
    rng = np.random.default_rng(seed)

    def _pick(keys: List[EdgeKey], cap: int) -> Tuple[EdgeKey, ...]:
        if len(keys) <= cap:
            return tuple(keys)
        chosen = np.sort(rng.choice(len(keys), size=cap, replace=False))
        return tuple(keys[i] for i in chosen)

    return EdgeSample(batch, _pick(batch.fg_keys(), max_fg), _pick(batch.bg_keys(), max_bg))


@dataclass(frozen=True, eq=False)
class _BatchArrays:
    node_x: np.ndarray
    node_y: np.ndarray
    edge_x: np.ndarray
    edge_y: np.ndarray
    subj: np.ndarray
    obj: np.ndarray
    is_fg: np.ndarray
    m_fg: int
    m_bg: int


def _features_for(features: Mapping[str, FeatureBundle], graph: SceneGraph) -> FeatureBundle:
    try:
        return features[graph.graph_id]
    except KeyError:
        raise DimensionMismatchError(f"No features for graph {graph.graph_id!r}")


def _collect(
    model: ClassifierModel,
    batch: Batch,
    features: Mapping[str, FeatureBundle],
    sample: Optional[EdgeSample],
) -> _BatchArrays:
    bundles = []
    for g in batch.graphs:
        feats = _features_for(features, g)
        _check_features(model, g, feats)
        bundles.append(feats)

    fg_keys = list(sample.fg_keys) if sample is not None else batch.fg_keys()
    bg_keys = list(sample.bg_keys) if sample is not None else batch.bg_keys()

    rows, labels, subj, obj = [], [], [], []
    for keys, is_fg in ((fg_keys, True), (bg_keys, False)):
        for g_idx, i, j in keys:
            g = batch.graphs[g_idx]
            rows.append(bundles[g_idx].edge_row(g.num_nodes, i, j))
            labels.append(g.edge_map[(i, j)] if is_fg else 0)
            subj.append(batch.node_offsets[g_idx] + i)
            obj.append(batch.node_offsets[g_idx] + j)

    m_fg, m_bg = len(fg_keys), len(bg_keys)
    return _BatchArrays(
        node_x=np.concatenate([b.node_features for b in bundles], axis=0),
        node_y=np.asarray([c for g in batch.graphs for c in g.nodes], dtype=np.int64),
        edge_x=np.stack(rows) if rows else np.zeros((0, model.d_e)),
        edge_y=np.asarray(labels, dtype=np.int64),
        subj=np.asarray(subj, dtype=np.int64),
        obj=np.asarray(obj, dtype=np.int64),
        is_fg=np.asarray([True] * m_fg + [False] * m_bg, dtype=bool),
        m_fg=m_fg,
        m_bg=m_bg,
    )


def _conditioning_labels(params: Mapping[str, np.ndarray], arrays: _BatchArrays, task: Task) -> np.ndarray:
    """Node labels the frequency prior is indexed with."""
    if task is Task.PREDCLS:
        return arrays.node_y
    logits = arrays.node_x @ params["node_W"] + params["node_b"]
    return softmax(logits, axis=1).argmax(axis=1)


def _evaluate(
    params: Mapping[str, np.ndarray],
    prior: Optional[np.ndarray],
    arrays: _BatchArrays,
    cfg: LossConfig,
    condition: Optional[np.ndarray],
    edge_term: bool,
    need_grad: bool,
) -> Tuple[LossValue, Dict[str, np.ndarray]]:
    n = arrays.node_x.shape[0]
    node_logits = arrays.node_x @ params["node_W"] + params["node_b"]
    node_lse = logsumexp(node_logits, axis=1)
    node_ce = node_lse - node_logits[np.arange(n), arrays.node_y]
    l_node = float(node_ce.mean())

    subj_labels = condition[arrays.subj] if condition is not None else arrays.subj
    obj_labels = condition[arrays.obj] if condition is not None else arrays.obj
    edge_logits = _edge_logits(params["edge_W"], params["edge_b"], prior, arrays.edge_x, subj_labels, obj_labels)
    m = edge_logits.shape[0]
    if m:
        edge_ce = logsumexp(edge_logits, axis=1) - edge_logits[np.arange(m), arrays.edge_y]
    else:
        edge_ce = np.zeros(0)
    terms = terms_from_losses(edge_ce[arrays.is_fg], edge_ce[~arrays.is_fg])

    if edge_term:
        weights = per_edge_weights(arrays, cfg)
        value = compute_loss(l_node, terms, cfg)
    else:
        weights = None
        value = LossValue(total=l_node, l_node=l_node, edge_terms=terms)

    grads: Dict[str, np.ndarray] = {}
    if need_grad:
        g_node = softmax(node_logits, axis=1)
        g_node[np.arange(n), arrays.node_y] -= 1.0
        g_node /= n
        grads["node_W"] = arrays.node_x.T @ g_node
        grads["node_b"] = g_node.sum(axis=0)

        if weights is not None and m:
            w = np.where(arrays.is_fg, weights.fg, weights.bg)
            g_edge = softmax(edge_logits, axis=1)
            g_edge[np.arange(m), arrays.edge_y] -= 1.0
            g_edge *= w[:, None]
            grads["edge_W"] = arrays.edge_x.T @ g_edge
            grads["edge_b"] = g_edge.sum(axis=0)
        else:
            grads["edge_W"] = np.zeros_like(params["edge_W"])
            grads["edge_b"] = np.zeros_like(params["edge_b"])

    return value, grads


def loss_and_gradients(
    model: ClassifierModel,
    batch: Batch,
    features: Mapping[str, FeatureBundle],
    cfg: LossConfig,
    task: Task = Task.PREDCLS,
    sample: Optional[EdgeSample] = None,
    edge_term: bool = True,
) -> Tuple[LossValue, Dict[str, np.ndarray]]:
    """
    Loss of a batch and its gradients with respect to every parameter.

    Labels come from the graphs: node classes, FG predicates and BG = 0
    for every other ordered pair. The node loss is the mean node
    cross-entropy; edge cross-entropies are combined with per_edge_weights.

    Args:
        model: Classifier
        batch: Batch of graphs
        features: FeatureBundle per graph_id
        cfg: Loss configuration
        task: PredCls or SGCls (selects the frequency-prior labels)
        sample: Optional subsampled edge view of batch
        edge_term: When False only the node loss is optimized

    Returns:
        (LossValue, gradients keyed by parameter name)

    Raises:
        DegenerateInputError: Normalized loss on a batch without FG edges
        DimensionMismatchError: When features or labels do not fit the model
    """
    task = Task.parse(task)
    params = model.parameters()
    arrays = _collect(model, batch, features, sample)
    condition = _conditioning_labels(params, arrays, task) if model.freq_bias is not None else None
    return _evaluate(params, model.freq_log_prior, arrays, cfg, condition, edge_term, need_grad=True)


def sgd_step(model: ClassifierModel, gradients: Mapping[str, np.ndarray], learning_rate: float) -> ClassifierModel:
    """
    Return a model with every parameter decremented by learning_rate * gradient.

    Raises:
        NonFiniteGradientError: On NaN or infinite gradients
        ConfigurationError: On a negative learning rate
    """
    if not np.isfinite(learning_rate) or learning_rate < 0:
        raise ConfigurationError(f"Learning rate must be finite and >= 0, got {learning_rate}")
    updates = {}
    for name, value in model.parameters().items():
        grad = gradients.get(name)
        if grad is None:
            continue
        grad = np.asarray(grad, dtype=float)
        if grad.shape != value.shape:
            raise DimensionMismatchError(f"Gradient {name} has shape {grad.shape}, expected {value.shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"Gradient {name} contains non-finite values")
        updates[name] = value - learning_rate * grad
    return replace(model, **updates)


@dataclass(frozen=True)
class TrainConfig:
    """
    Training hyperparameters.

    Attributes:
        loss: Loss configuration
        learning_rate: SGD step size
        epochs: Passes over the training set
        batch_size: Graphs per batch
        edge_sampling: Optional (max_fg, max_bg) caps per batch
        seed: Seed for initialization, shuffling and sampling
        task: PredCls or SGCls
        skip_degenerate: Drop the edge term of batches where it is undefined
        val_ks: K values of the per-epoch validation metrics
    """

    loss: LossConfig = field(default_factory=LossConfig)
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 6
    edge_sampling: Optional[Tuple[int, int]] = None
    seed: int = 0
    task: Task = Task.PREDCLS
    skip_degenerate: bool = True
    val_ks: Tuple[int, ...] = (20, 50, 100)

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", Task.parse(self.task))
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.edge_sampling is not None:
            caps = tuple(int(c) for c in self.edge_sampling)
            if len(caps) != 2 or min(caps) < 1:
                raise ConfigurationError(f"edge_sampling caps must be two values >= 1, got {self.edge_sampling}")
            object.__setattr__(self, "edge_sampling", caps)
        ks = tuple(int(k) for k in self.val_ks)
        if any(k < 1 for k in ks):
            raise ConfigurationError(f"val_ks must be >= 1, got {self.val_ks}")
        object.__setattr__(self, "val_ks", ks)

    @classmethod
    def from_config(cls, section: Mapping[str, Any], loss: Optional[LossConfig] = None) -> "TrainConfig":
        caps = section.get("edge_sampling")
        return cls(
            loss=loss or LossConfig.from_config(section.get("loss", {}) or {}),
            learning_rate=float(section.get("learning_rate", 0.1)),
            epochs=int(section.get("epochs", 10)),
            batch_size=int(section.get("batch_size", 6)),
            edge_sampling=tuple(caps) if caps else None,
            seed=int(section.get("seed", 0)),
            task=section.get("task", Task.PREDCLS),
            skip_degenerate=bool(section.get("skip_degenerate", True)),
            val_ks=tuple(section.get("val_ks", (20, 50, 100))),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "loss": self.loss.to_dict(),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "edge_sampling": list(self.edge_sampling) if self.edge_sampling else None,
            "seed": self.seed,
            "task": self.task.value,
            "skip_degenerate": self.skip_degenerate,
            "val_ks": list(self.val_ks),
        }


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


@log_execution_time(logger)
def train(
    train_set: Sequence[SceneGraph],
    features: Mapping[str, FeatureBundle],
    cfg: TrainConfig,
    c_obj: Optional[int] = None,
    c_pred: Optional[int] = None,
    freq_bias: Optional[FreqModel] = None,
    val_set: Optional[Sequence[SceneGraph]] = None,
) -> Tuple[ClassifierModel, pd.DataFrame]:
    """
    Train a classifier with SGD.

    Batches are drawn from a seeded per-epoch shuffle. With
    skip_degenerate, a batch whose edge term is undefined (normalized
    loss without FG edges) still contributes its node loss.

    Args:
        train_set: Training graphs
        features: FeatureBundle per graph_id (training and validation graphs)
        cfg: Training configuration
        c_obj: Object vocabulary size (inferred from the data when omitted)
        c_pred: Predicate vocabulary size (inferred when omitted)
        freq_bias: Optional frequency model attached to the edge head
        val_set: Optional validation graphs evaluated after every epoch

    Returns:
        (trained model, per-epoch history DataFrame)

    Raises:
        DegenerateInputError: Empty training set, or a degenerate batch with skip_degenerate off
    """
    if not train_set:
        raise DegenerateInputError("Cannot train on an empty training set")

    every = list(train_set) + list(val_set or [])
    if c_obj is None:
        c_obj = 1 + max(max(g.nodes) for g in every)
    if c_pred is None:
        c_pred = freq_bias.num_predicates if freq_bias is not None else max(
            (p for g in every for _, _, p in g.fg_edges), default=0
        )
    if c_pred < 1:
        raise ConfigurationError("Predicate vocabulary size is unknown; pass c_pred")

    first = _features_for(features, train_set[0])
    d_e = next(
        (_features_for(features, g).edge_dim for g in train_set if g.num_nodes > 1),
        0,
    )
    model = init_model(first.node_dim, d_e, c_obj, c_pred, seed=cfg.seed, freq_bias=freq_bias)

    rng = np.random.default_rng([cfg.seed, 1])
    counts = triplet_counts(train_set) if val_set else None
    history: List[Dict[str, Any]] = []

    logger.info(
        f"Training {cfg.loss.variant.value} loss, {cfg.task.value}, {len(train_set)} graphs, "
        f"{cfg.epochs} epochs, batch size {cfg.batch_size}, lr {cfg.learning_rate}"
    )

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        l_node, l_fg, l_bg, dens, totals = [], [], [], [], []
        m_fg = m_bg = batches = skipped = 0

        for start in range(0, len(order), cfg.batch_size):
            batch = make_batch(train_set[i] for i in order[start:start + cfg.batch_size])
            sample = None
            if cfg.edge_sampling is not None:
                sample = sample_edges(batch, *cfg.edge_sampling, seed=int(rng.integers(2**31 - 1)))

            try:
                value, grads = loss_and_gradients(model, batch, features, cfg.loss, cfg.task, sample)
            except DegenerateInputError:
                if not cfg.skip_degenerate:
                    raise
                skipped += 1
                value, grads = loss_and_gradients(
                    model, batch, features, cfg.loss, cfg.task, sample, edge_term=False
                )

            model = sgd_step(model, grads, cfg.learning_rate)

            terms: EdgeLossTerms = value.edge_terms
            batches += 1
            l_node.append(value.l_node)
            totals.append(value.total)
            if terms.m_fg:
                l_fg.append(terms.l_fg)
            if terms.m_bg:
                l_bg.append(terms.l_bg)
            if terms.m_fg + terms.m_bg:
                dens.append(terms.d)
            m_fg += terms.m_fg
            m_bg += terms.m_bg

        row: Dict[str, Any] = {
            "epoch": epoch,
            "l_node": _mean(l_node),
            "l_fg": _mean(l_fg),
            "l_bg": _mean(l_bg),
            "d": _mean(dens),
            "total": _mean(totals),
            "m_fg": m_fg,
            "m_bg": m_bg,
            "batches": batches,
            "skipped_batches": skipped,
        }
        if val_set:
            preds = predict_dataset(model, val_set, features, cfg.task)
            report = recall_suite(preds, val_set, counts, cfg.val_ks, cfg.task, triplet_level=False)
            for r in report.rows:
                row[f"val_{r.metric}@{r.k}"] = r.value
        history.append(row)

        logger.info(
            f"Epoch {epoch}/{cfg.epochs}: total={row['total']:.4f} l_node={row['l_node']:.4f} "
            f"l_fg={row['l_fg']:.4f} l_bg={row['l_bg']:.4f} d={row['d']:.4f} skipped={skipped}"
        )

    frame = pd.DataFrame(history) if history else pd.DataFrame(columns=HISTORY_COLUMNS)
    return model, frame


def grad_check(
    model: ClassifierModel,
    batch: Batch,
    features: Mapping[str, FeatureBundle],
    cfg: LossConfig,
    task: Task = Task.PREDCLS,
    epsilon: float = 1e-5,
    max_params: int = 400,
    seed: int = 0,
    sample: Optional[EdgeSample] = None,
    param_names: Optional[Sequence[str]] = None,
    gradients: Optional[Mapping[str, np.ndarray]] = None,
    floor: float = 1e-3,
) -> float:
    """
    Largest relative error between analytic and central-difference gradients.

    Per entry the error is |a - n| / max(|a|, |n|, floor). Above
    max_params entries a seeded random subset is checked. In SGCls the
    frequency-prior labels are held at their value for the unperturbed
    model.

    Args:
        model: Classifier at which gradients are checked
        batch: Batch of graphs
        features: FeatureBundle per graph_id
        cfg: Loss configuration
        task: PredCls or SGCls
        epsilon: Finite-difference step
        max_params: Entries checked before subsampling
        seed: Seed of the subset selection
        sample: Optional subsampled edge view
        param_names: Restrict the check to these parameters
        gradients: Gradients to verify (computed analytically when omitted)
        floor: Denominator floor for tiny gradients

    Returns:
        Maximum relative error (0.0 when no entry is checked)

    Raises:
        ConfigurationError: When epsilon <= 0
    """
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be > 0, got {epsilon}")
    task = Task.parse(task)
    params = model.parameters()
    prior = model.freq_log_prior
    arrays = _collect(model, batch, features, sample)
    condition = _conditioning_labels(params, arrays, task) if prior is not None else None
    if gradients is None:
        _, gradients = _evaluate(params, prior, arrays, cfg, condition, True, need_grad=True)

    names = PARAMETER_NAMES if param_names is None else tuple(param_names)
    coords = [(name, k) for name in names for k in range(params[name].size)]
    if not coords:
        return 0.0
    if len(coords) > max_params:
        picked = np.sort(np.random.default_rng(seed).choice(len(coords), size=max_params, replace=False))
        coords = [coords[i] for i in picked]

    worst = 0.0
    for name, k in coords:
        shifted = dict(params)
        values = []
        for step in (epsilon, -epsilon):
            perturbed = params[name].copy()
            perturbed.flat[k] += step
            shifted[name] = perturbed
            values.append(_evaluate(shifted, prior, arrays, cfg, condition, True, need_grad=False)[0].total)
        numeric = (values[0] - values[1]) / (2.0 * epsilon)
        analytic = float(np.asarray(gradients[name]).flat[k])
        error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, error)

    logger.debug(f"Gradient check over {len(coords)} entries: max relative error {worst:.3e}")
    return worst
