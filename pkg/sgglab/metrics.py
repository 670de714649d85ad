"""
Recall metrics for scene-graph predictions.

Image-level R@K (graph-constrained or unconstrained), zero-shot and
n-shot R@K, triplet-level R_tr@K, weighted triplet recall wR_tr@K and
mean recall mR@K. BG (predicate 0) is never a ranking candidate.

Ranking ties are broken by pair index, then predicate id. Triplet ranks
count strictly higher-scoring candidates, so ties resolve in favour of
the ground truth.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .core import Pair, SceneGraph, Triplet, all_pairs
from .freq import FreqModel, TripletCounts, freq_predict
from .utils.exceptions import (
    ConfigurationError,
    DegenerateInputError,
    PredictionMismatchError,
    UnseenPairError,
)
from .utils.helpers import write_json
from .utils.logger import log_execution_time

logger = logging.getLogger("sgglab.metrics")

REPORT_COLUMNS = ["metric", "K", "variant", "value", "count"]

# Above this many candidates per pair the SGCls rank count loops over predicates
_DENSE_CANDIDATE_LIMIT = 2_000_000

# Slack on the [0, 1] range and the unit row sum of node and pair distributions
PROB_TOLERANCE = 1e-6

GTTriplet = Tuple[int, int, int, int, int]


def _check_distributions(graph_id: str, name: str, rows: np.ndarray) -> None:
    if rows.size == 0:
        return
    if not np.all(np.isfinite(rows)) or rows.min() < -PROB_TOLERANCE or rows.max() > 1.0 + PROB_TOLERANCE:
        raise PredictionMismatchError(f"Prediction {graph_id!r}: {name} has values outside [0, 1]")
    worst = float(np.abs(rows.sum(axis=1) - 1.0).max())
    if worst > PROB_TOLERANCE:
        raise PredictionMismatchError(f"Prediction {graph_id!r}: {name} rows are off 1 by up to {worst:.3g}")


def round_distributions(rows: np.ndarray, decimals: int) -> np.ndarray:
    """
    Round each row to decimals places while keeping its sum at 1.

    Largest-remainder rounding: every entry is floored to a whole number
    of 10**-decimals units and the units still missing from the row go
    to the entries with the largest remainders (lower index first on
    ties), so no entry turns negative.
    """
    rows = np.clip(np.asarray(rows, dtype=float), 0.0, 1.0)
    if rows.size == 0:
        return rows
    scale = 10.0 ** decimals
    scaled = rows * scale
    units = np.floor(scaled)
    missing = np.clip(np.rint(scale - units.sum(axis=1)), 0, rows.shape[1])
    order = np.argsort(units - scaled, axis=1, kind="stable")
    ranks = np.argsort(order, axis=1, kind="stable")
    units += ranks < missing[:, None]
    return units / scale


class Task(str, Enum):
    PREDCLS = "predcls"
    SGCLS = "sgcls"

    @classmethod
    def parse(cls, value: Union[str, "Task"]) -> "Task":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError(f"Unknown task {value!r} (expected predcls or sgcls)")


@dataclass(frozen=True, eq=False)
class Prediction:
    """
    Model output for one image.

    Attributes:
        graph_id: Image identifier
        node_probs: [N, C_obj] object-class distributions
        pairs: Ordered pairs covered by pair_probs
        pair_probs: [len(pairs), 1 + C_pred] predicate distributions, column 0 = BG

    Every row of node_probs and pair_probs must be a distribution up to
    PROB_TOLERANCE; anything else raises PredictionMismatchError.
    """

    graph_id: str
    node_probs: np.ndarray
    pairs: Tuple[Pair, ...]
    pair_probs: np.ndarray

    def __post_init__(self) -> None:
        node_probs = np.atleast_2d(np.asarray(self.node_probs, dtype=float))
        pair_probs = np.asarray(self.pair_probs, dtype=float)
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        if pair_probs.ndim == 1 and pair_probs.size == 0:
            pair_probs = pair_probs.reshape(0, 0)
        if pair_probs.ndim != 2 or pair_probs.shape[0] != len(pairs):
            raise PredictionMismatchError(
                f"Prediction {self.graph_id!r}: {len(pairs)} pairs but pair_probs has shape {pair_probs.shape}"
            )
        _check_distributions(self.graph_id, "node_probs", node_probs)
        _check_distributions(self.graph_id, "pair_probs", pair_probs)
        object.__setattr__(self, "node_probs", node_probs)
        object.__setattr__(self, "pair_probs", pair_probs)
        object.__setattr__(self, "pairs", pairs)

    @cached_property
    def _rows(self) -> Dict[Pair, int]:
        return {pair: row for row, pair in enumerate(self.pairs)}

    def probs_for(self, i: int, j: int) -> np.ndarray:
        """
        Predicate distribution of the ordered pair (i, j).

        Raises:
            PredictionMismatchError: When the pair is missing
        """
        row = self._rows.get((i, j))
        if row is None:
            raise PredictionMismatchError(f"Prediction {self.graph_id!r} has no distribution for pair ({i}, {j})")
        return self.pair_probs[row]

    def canonical_pair_probs(self, n: int) -> np.ndarray:
        """pair_probs reordered to canonical pair order for a graph of n nodes."""
        pairs = all_pairs(n)
        if not pairs:
            return np.zeros((0, self.pair_probs.shape[1] if self.pair_probs.ndim == 2 else 0))
        return np.stack([self.probs_for(i, j) for i, j in pairs])

    def to_record(self, decimals: Optional[int] = None) -> Dict[str, Any]:
        node_probs, pair_probs = self.node_probs, self.pair_probs
        if decimals is not None:
            node_probs = round_distributions(node_probs, decimals)
            pair_probs = round_distributions(pair_probs, decimals)
        return {
            "graph_id": self.graph_id,
            "node_probs": node_probs.tolist(),
            "pair_probs": [
                {"s": i, "o": j, "probs": pair_probs[row].tolist()}
                for row, (i, j) in enumerate(self.pairs)
            ],
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Prediction":
        entries = record.get("pair_probs", [])
        return cls(
            graph_id=str(record["graph_id"]),
            node_probs=np.asarray(record["node_probs"], dtype=float),
            pairs=tuple((int(e["s"]), int(e["o"])) for e in entries),
            pair_probs=np.asarray([e["probs"] for e in entries], dtype=float),
        )


@dataclass(frozen=True)
class RankedTriplet:
    subject_node: int
    object_node: int
    subject_class: int
    predicate: int
    object_class: int
    score: float

    def key(self) -> GTTriplet:
        return (self.subject_node, self.object_node, self.subject_class, self.predicate, self.object_class)


def _node_hypotheses(pred: Prediction, graph: SceneGraph, task: Task) -> Tuple[np.ndarray, np.ndarray]:
    """Class per node and its probability: ground truth with prob 1 in PredCls, argmax in SGCls."""
    n = graph.num_nodes
    if task is Task.PREDCLS:
        return np.asarray(graph.nodes, dtype=np.int64), np.ones(n)
    if pred.node_probs.shape[0] != n:
        raise PredictionMismatchError(
            f"Prediction {pred.graph_id!r} has {pred.node_probs.shape[0]} node rows, graph has {n} nodes"
        )
    classes = pred.node_probs.argmax(axis=1)
    return classes, pred.node_probs[np.arange(n), classes]


def rank_triplets(
    pred: Prediction,
    graph: SceneGraph,
    constrained: bool = False,
    task: Union[Task, str] = Task.PREDCLS,
    top_k: Optional[int] = None,
) -> List[RankedTriplet]:
    """
    Rank triplet candidates of one image by score.

    Score = subject prob * predicate prob * object prob, evaluated left to
    right. Unconstrained ranking lists every non-BG predicate per pair;
    constrained ranking keeps each pair's argmax non-BG predicate.

    Args:
        pred: Prediction of the image
        graph: Ground-truth graph (nodes give PredCls classes and N)
        constrained: Keep only the top-1 predicate per pair
        task: PredCls or SGCls
        top_k: Return only the first top_k candidates

    Returns:
        Candidates sorted by score descending, then pair index, then predicate id

    Raises:
        PredictionMismatchError: On missing pair distributions or node rows
    """
    task = Task.parse(task)
    n = graph.num_nodes
    classes, node_scores = _node_hypotheses(pred, graph, task)
    pairs = all_pairs(n)
    if not pairs:
        return []

    probs = pred.canonical_pair_probs(n)[:, 1:]
    n_pred = probs.shape[1]
    subj = np.fromiter((i for i, _ in pairs), dtype=np.int64, count=len(pairs))
    obj = np.fromiter((j for _, j in pairs), dtype=np.int64, count=len(pairs))

    if constrained:
        pair_idx = np.arange(len(pairs))
        pred_col = probs.argmax(axis=1)
    else:
        pair_idx = np.repeat(np.arange(len(pairs)), n_pred)
        pred_col = np.tile(np.arange(n_pred), len(pairs))

    scores = (node_scores[subj[pair_idx]] * probs[pair_idx, pred_col]) * node_scores[obj[pair_idx]]
    order = np.lexsort((pred_col, pair_idx, -scores))
    if top_k is not None:
        order = order[:top_k]

    return [
        RankedTriplet(
            subject_node=int(subj[pair_idx[k]]),
            object_node=int(obj[pair_idx[k]]),
            subject_class=int(classes[subj[pair_idx[k]]]),
            predicate=int(pred_col[k]) + 1,
            object_class=int(classes[obj[pair_idx[k]]]),
            score=float(scores[k]),
        )
        for k in order
    ]


def image_recall_at_k(
    ranked: Sequence[RankedTriplet],
    gt_triplets: Iterable[GTTriplet],
    k: int,
) -> Optional[float]:
    """
    |Top_K ∩ GT| / |GT| for one image.

    A match needs identical nodes and identical class triple; each GT
    triplet matches at most once.

    Returns:
        Recall, or None when the image has no GT (the image is skipped)
    """
    if k < 1:
        raise ConfigurationError(f"K must be >= 1, got {k}")
    gt = set(gt_triplets)
    if not gt:
        return None
    top = {r.key() for r in ranked[:k]}
    return len(gt & top) / len(gt)


def n_shot_filter(graphs: Iterable[SceneGraph], counts: TripletCounts, n: float) -> List[SceneGraph]:
    """
    Restrict GT to triplets seen at most n times in training.

    Images left without qualifying triplets are dropped.
    """
    if n < 0:
        raise ConfigurationError(f"n-shot threshold must be >= 0, got {n}")
    kept = []
    for g in graphs:
        edges = tuple(e for e in g.fg_edges if counts.get((g.nodes[e[0]], e[2], g.nodes[e[1]])) <= n)
        if edges:
            kept.append(SceneGraph(g.graph_id, g.nodes, edges))
    return kept


def _align(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    allow_subset: bool = False,
) -> Dict[str, Prediction]:
    if isinstance(preds, Mapping):
        by_id = dict(preds)
    else:
        by_id = {}
        for p in preds:
            if p.graph_id in by_id:
                raise PredictionMismatchError(f"Duplicate prediction for graph {p.graph_id!r}")
            by_id[p.graph_id] = p
    graph_ids = [g.graph_id for g in graphs]
    missing = [gid for gid in graph_ids if gid not in by_id]
    if missing:
        raise PredictionMismatchError(f"{len(missing)} graphs have no prediction, e.g. {missing[0]!r}")
    if not allow_subset:
        extra = set(by_id) - set(graph_ids)
        if extra:
            raise PredictionMismatchError(f"{len(extra)} predictions match no graph, e.g. {sorted(extra)[0]!r}")
    return by_id


def _image_recall(
    by_id: Mapping[str, Prediction],
    graphs: Sequence[SceneGraph],
    k: int,
    constrained: bool,
    task: Task,
) -> Tuple[Optional[float], int]:
    recalls = []
    for g in graphs:
        ranked = rank_triplets(by_id[g.graph_id], g, constrained, task, top_k=k)
        r = image_recall_at_k(ranked, g.gt_triplets(), k)
        if r is not None:
            recalls.append(r)
    if not recalls:
        return None, 0
    return float(np.mean(recalls)), len(recalls)


def image_recall(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    k: int,
    constrained: bool = False,
    task: Union[Task, str] = Task.PREDCLS,
) -> Optional[float]:
    """Dataset R@K: mean of per-image recalls over images with GT (None if there are none)."""
    by_id = _align(preds, graphs, allow_subset=True)
    return _image_recall(by_id, graphs, k, constrained, Task.parse(task))[0]


def _per_class_hits(
    by_id: Mapping[str, Prediction],
    graphs: Sequence[SceneGraph],
    k: int,
    constrained: bool,
    task: Task,
) -> Tuple[Dict[int, int], Dict[int, int]]:
    hits: Dict[int, int] = {}
    totals: Dict[int, int] = {}
    for g in graphs:
        gt = g.gt_triplets()
        if not gt:
            continue
        top = {r.key() for r in rank_triplets(by_id[g.graph_id], g, constrained, task, top_k=k)}
        for t in set(gt):
            totals[t[3]] = totals.get(t[3], 0) + 1
            if t in top:
                hits[t[3]] = hits.get(t[3], 0) + 1
    return hits, totals


def mean_recall(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    k: int,
    constrained: bool = False,
    task: Union[Task, str] = Task.PREDCLS,
) -> Optional[float]:
    """
    mR@K: unweighted mean over predicate classes of dataset-pooled recall.

    Per class, recall = GT instances of that class found in their
    image's top K / GT instances of that class.

    Returns:
        Mean recall, or None when the test set has no GT triplets
    """
    if k < 1:
        raise ConfigurationError(f"K must be >= 1, got {k}")
    by_id = _align(preds, graphs, allow_subset=True)
    hits, totals = _per_class_hits(by_id, graphs, k, constrained, Task.parse(task))
    if not totals:
        return None
    return float(np.mean([hits.get(c, 0) / totals[c] for c in sorted(totals)]))


def _count_higher(
    ps: np.ndarray,
    pred_probs: np.ndarray,
    po: np.ndarray,
    gt_score: float,
) -> int:
    """Count SGCls candidates (a, q, b) with (ps[a] * P[q]) * po[b] > gt_score."""
    if ps.size * pred_probs.size * po.size <= _DENSE_CANDIDATE_LIMIT:
        cube = (ps[:, None, None] * pred_probs[None, :, None]) * po[None, None, :]
        return int(np.count_nonzero(cube > gt_score))
    higher = 0
    for q in range(pred_probs.size):
        plane = (ps * pred_probs[q])[:, None] * po[None, :]
        higher += int(np.count_nonzero(plane > gt_score))
    return higher


def triplet_ranks(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    task: Union[Task, str] = Task.PREDCLS,
) -> List[Tuple[Triplet, int]]:
    """
    Rank of every GT triplet among the candidates of its own ordered pair.

    rank = 1 + number of candidates with a strictly higher score. In
    PredCls the candidates are the non-BG predicates; in SGCls they are
    every (subject class, predicate, object class) combination.

    Returns:
        (class triplet, rank) per GT triplet, in graph then edge order
    """
    task = Task.parse(task)
    by_id = _align(preds, graphs, allow_subset=True)
    ranks: List[Tuple[Triplet, int]] = []
    for g in graphs:
        pred = by_id[g.graph_id]
        if task is Task.SGCLS and g.fg_edges and pred.node_probs.shape[0] != g.num_nodes:
            raise PredictionMismatchError(
                f"Prediction {pred.graph_id!r} has {pred.node_probs.shape[0]} node rows, graph has {g.num_nodes} nodes"
            )
        for s, o, p in g.fg_edges:
            probs = pred.probs_for(s, o)[1:]
            s_cls, o_cls = g.nodes[s], g.nodes[o]
            if task is Task.PREDCLS:
                higher = int(np.count_nonzero(probs > probs[p - 1]))
            else:
                ps, po = pred.node_probs[s], pred.node_probs[o]
                gt_score = (ps[s_cls] * probs[p - 1]) * po[o_cls]
                higher = _count_higher(ps, probs, po, gt_score)
            ranks.append(((s_cls, p, o_cls), 1 + higher))
    return ranks


def triplet_recall(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    k: int,
    task: Union[Task, str] = Task.PREDCLS,
) -> float:
    """
    R_tr@K: fraction of GT triplets ranked within the top K of their pair.

    Raises:
        DegenerateInputError: When the test set has no GT triplets
    """
    if k < 1:
        raise ConfigurationError(f"K must be >= 1, got {k}")
    ranks = triplet_ranks(preds, graphs, task)
    if not ranks:
        raise DegenerateInputError("Triplet recall needs at least one GT triplet")
    return float(np.mean([r <= k for _, r in ranks]))


def triplet_weights(n_values: Sequence[int]) -> np.ndarray:
    """Weights 1 / (n_t + 1), normalized to sum to 1 over the given instances."""
    inv = 1.0 / (np.asarray(n_values, dtype=float) + 1.0)
    if inv.size == 0:
        raise DegenerateInputError("Cannot weight an empty triplet set")
    return inv / inv.sum()


def weighted_triplet_recall(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    counts: TripletCounts,
    k: int,
    task: Union[Task, str] = Task.PREDCLS,
) -> float:
    """
    wR_tr@K: triplet recall with each GT instance weighted by 1 / (n_t + 1).

    Instances are pooled across the whole test set before weighting.

    Raises:
        DegenerateInputError: When the test set has no GT triplets
    """
    if k < 1:
        raise ConfigurationError(f"K must be >= 1, got {k}")
    ranks = triplet_ranks(preds, graphs, task)
    if not ranks:
        raise DegenerateInputError("Weighted triplet recall needs at least one GT triplet")
    weights = triplet_weights([counts.get(t) for t, _ in ranks])
    hits = np.asarray([r <= k for _, r in ranks], dtype=float)
    return float(np.dot(weights, hits))


@dataclass(frozen=True)
class MetricRow:
    metric: str
    k: int
    variant: str
    value: float
    count: int


@dataclass
class MetricReport:
    """Metric rows keyed by (metric, K, variant)."""

    rows: List[MetricRow] = field(default_factory=list)

    def add(self, metric: str, k: int, variant: str, value: Optional[float], count: int) -> None:
        if value is None:
            logger.warning(f"{metric}@{k} ({variant}) has no evaluable instances; row omitted")
            return
        self.rows.append(MetricRow(metric, int(k), variant, float(value), int(count)))

    def get(self, metric: str, k: int, variant: str = "unconstrained") -> float:
        for row in self.rows:
            if row.metric == metric and row.k == k and row.variant == variant:
                return row.value
        raise KeyError(f"No row for {metric}@{k} ({variant})")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.metric, r.k, r.variant, r.value, r.count] for r in self.rows],
            columns=REPORT_COLUMNS,
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    def to_json(self, path: Union[str, Path]) -> None:
        write_json(path, {"rows": [
            {"metric": r.metric, "K": r.k, "variant": r.variant, "value": r.value, "count": r.count}
            for r in self.rows
        ]})


@log_execution_time(logger)
def recall_suite(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    counts: Optional[TripletCounts],
    ks: Sequence[int],
    task: Union[Task, str] = Task.PREDCLS,
    constrained: bool = False,
    nshots: Sequence[int] = (),
    triplet_level: bool = True,
) -> MetricReport:
    """
    Full metric suite for a test set.

    Rows (metric, K, variant):
        R, mR and, with counts, R_ZS and R_<n>shot for the unconstrained
        variant (plus the constrained variant when requested); with
        triplet_level, R_tr and (with counts) wR_tr under variant 'triplet'.

    Args:
        preds: Predictions keyed by graph_id (or a sequence of them)
        graphs: Ground-truth test graphs
        counts: Training triplet counts (zero/n-shot and wR_tr need them)
        ks: K values
        task: PredCls or SGCls
        constrained: Also report graph-constrained rows
        nshots: n-shot thresholds
        triplet_level: Include R_tr and wR_tr

    Returns:
        MetricReport

    Raises:
        PredictionMismatchError: When predictions and graphs are not aligned by graph_id
    """
    task = Task.parse(task)
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ConfigurationError(f"K values must be >= 1, got {ks}")
    by_id = _align(preds, graphs)
    logger.info(f"Evaluating {len(graphs)} images ({task.value}), K={ks}")

    subsets: List[Tuple[str, Sequence[SceneGraph]]] = [("R", graphs)]
    if counts is not None:
        subsets.append(("R_ZS", n_shot_filter(graphs, counts, 0)))
        for n in nshots:
            subsets.append((f"R_{int(n)}shot", n_shot_filter(graphs, counts, n)))

    variants = [("unconstrained", False)] + ([("constrained", True)] if constrained else [])
    gt_total = sum(g.m_fg for g in graphs)
    report = MetricReport()
    for variant, flag in variants:
        for metric, subset in subsets:
            for k in ks:
                value, count = _image_recall(by_id, subset, k, flag, task)
                report.add(metric, k, variant, value, count)
        for k in ks:
            report.add("mR", k, variant, mean_recall(by_id, graphs, k, flag, task), gt_total)

    if triplet_level:
        for k in ks:
            value = triplet_recall(by_id, graphs, k, task) if gt_total else None
            report.add("R_tr", k, "triplet", value, gt_total)
        if counts is not None and gt_total:
            for k in ks:
                report.add("wR_tr", k, "triplet", weighted_triplet_recall(by_id, graphs, counts, k, task), gt_total)

    return report


def recall_by_graph_size(
    preds: Union[Mapping[str, Prediction], Sequence[Prediction]],
    graphs: Sequence[SceneGraph],
    k: int,
    n_bins: int = 4,
    task: Union[Task, str] = Task.PREDCLS,
    constrained: bool = False,
) -> pd.DataFrame:
    """
    Image R@K per graph-size bin.

    Graphs are sorted by node count (then graph_id) and split into n_bins
    bins of nearly equal size.

    Returns:
        DataFrame with bin, n_min, n_max, images, recall
    """
    if n_bins < 1:
        raise ConfigurationError(f"n_bins must be >= 1, got {n_bins}")
    task = Task.parse(task)
    by_id = _align(preds, graphs, allow_subset=True)
    ordered = sorted(graphs, key=lambda g: (g.num_nodes, g.graph_id))
    rows = []
    for b, idx in enumerate(np.array_split(np.arange(len(ordered)), n_bins)):
        chunk = [ordered[i] for i in idx]
        if not chunk:
            continue
        value, count = _image_recall(by_id, chunk, k, constrained, task)
        rows.append({
            "bin": b,
            "n_min": chunk[0].num_nodes,
            "n_max": chunk[-1].num_nodes,
            "images": count,
            "recall": value if value is not None else np.nan,
        })
    return pd.DataFrame(rows, columns=["bin", "n_min", "n_max", "images", "recall"])


def freq_predictions(
    model: FreqModel,
    graphs: Iterable[SceneGraph],
    num_object_classes: Optional[int] = None,
) -> Dict[str, Prediction]:
    """
    The frequency baseline as a predictor.

    Node distributions are one-hot on ground truth; every pair gets
    freq_predict of its class pair (BG mass 0). Unseen class pairs fall
    back to the uniform predicate distribution.
    """
    graphs = list(graphs)
    c_obj = num_object_classes or 1 + max((max(g.nodes) for g in graphs), default=0)
    uniform = np.zeros(1 + model.num_predicates)
    uniform[1:] = 1.0 / model.num_predicates

    cache: Dict[Tuple[int, int], np.ndarray] = {}
    unseen = 0
    preds: Dict[str, Prediction] = {}
    for g in graphs:
        pairs = all_pairs(g.num_nodes)
        rows = []
        for i, j in pairs:
            key = (g.nodes[i], g.nodes[j])
            if key not in cache:
                try:
                    cache[key] = freq_predict(model, *key)
                except UnseenPairError:
                    cache[key] = uniform
            if key not in model.counts:
                unseen += 1
            rows.append(cache[key])
        node_probs = np.eye(c_obj)[np.asarray(g.nodes, dtype=np.int64)]
        pair_probs = np.stack(rows) if rows else np.zeros((0, 1 + model.num_predicates))
        preds[g.graph_id] = Prediction(g.graph_id, node_probs, tuple(pairs), pair_probs)

    if unseen:
        logger.info(f"Frequency predictor: {unseen} pairs with unseen class pairs got uniform predicates")
    return preds
