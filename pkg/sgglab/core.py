"""
Scene-graph data model for the sgglab laboratory.

Covers graph validation, FG/BG edge accounting, graph density, batching
and dataset statistics. BG edges are never stored; they are the
complement of the FG edges over the ordered node pairs of a graph and
are enumerated on demand.

Pair order convention used across the package: ordered pairs (i, j),
i != j, in row-major order. The position of a pair in that order is its
"pair index".
"""

import logging
import numbers
from dataclasses import dataclass, field
from functools import cached_property
from typing import (
    TYPE_CHECKING,
    Any,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd

from .utils.exceptions import ConfigurationError, DegenerateInputError, GraphValidationError

if TYPE_CHECKING:
    from .freq import TripletCounts

logger = logging.getLogger("sgglab.core")

Pair = Tuple[int, int]
Edge = Tuple[int, int, int]
Triplet = Tuple[int, int, int]
EdgeKey = Tuple[int, int, int]


def num_pairs(n: int) -> int:
    """Number of ordered node pairs of a graph with n nodes."""
    return n * (n - 1)


def all_pairs(n: int) -> List[Pair]:
    """All ordered pairs (i, j), i != j, in row-major order."""
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def pair_index(n: int, i: int, j: int) -> int:
    """Position of the ordered pair (i, j) in row-major pair order."""
    return i * (n - 1) + (j if j < i else j - 1)


@dataclass(frozen=True)
class SceneGraph:
    """
    Labeled scene graph.

    Attributes:
        graph_id: Opaque identifier
        nodes: Object-class id per node (index = node id)
        fg_edges: (subject_node, object_node, predicate) triples, predicate >= 1
    """

    graph_id: str
    nodes: Tuple[int, ...]
    fg_edges: Tuple[Edge, ...] = ()

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def m_fg(self) -> int:
        return len(self.fg_edges)

    @property
    def m_bg(self) -> int:
        return num_pairs(self.num_nodes) - self.m_fg

    @cached_property
    def edge_map(self) -> Dict[Pair, int]:
        """Ordered pair -> FG predicate."""
        return {(s, o): p for s, o, p in self.fg_edges}

    def triplets(self) -> List[Triplet]:
        """Class-level (subject_class, predicate, object_class) per FG edge."""
        return [(self.nodes[s], p, self.nodes[o]) for s, o, p in self.fg_edges]

    def gt_triplets(self) -> List[Tuple[int, int, int, int, int]]:
        """(subject_node, object_node, subject_class, predicate, object_class) per FG edge."""
        return [(s, o, self.nodes[s], p, self.nodes[o]) for s, o, p in self.fg_edges]

    def to_record(self) -> Dict[str, Any]:
        return {
            "graph_id": self.graph_id,
            "nodes": list(self.nodes),
            "fg_edges": [list(e) for e in self.fg_edges],
        }


def _as_int(value: Any, what: str, graph_id: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise GraphValidationError(f"Graph {graph_id!r}: {what} must be an integer, got {value!r}")
    return int(value)


def validate_graph(raw: Union[SceneGraph, Mapping[str, Any]]) -> SceneGraph:
    """
    Validate a scene-graph record and return a SceneGraph.

    Duplicate FG edges on the same ordered pair collapse to the first
    occurrence; validating an already valid graph returns an equal graph.

    Args:
        raw: SceneGraph or mapping with graph_id, nodes and fg_edges

    Returns:
        Valid SceneGraph

    Raises:
        GraphValidationError: On node count < 1, out-of-range node index,
            self-loop, negative class id or predicate id < 1
    """
    if isinstance(raw, SceneGraph):
        graph_id, nodes_in, edges_in = raw.graph_id, raw.nodes, raw.fg_edges
    elif isinstance(raw, Mapping):
        graph_id = raw.get("graph_id", "")
        nodes_in = raw.get("nodes")
        edges_in = raw.get("fg_edges", [])
    else:
        raise GraphValidationError(f"Unsupported graph record type: {type(raw).__name__}")

    graph_id = str(graph_id)
    if nodes_in is None or isinstance(nodes_in, (str, bytes)):
        raise GraphValidationError(f"Graph {graph_id!r}: missing node list")
    nodes = tuple(_as_int(c, "object class", graph_id) for c in nodes_in)
    if len(nodes) < 1:
        raise GraphValidationError(f"Graph {graph_id!r}: node count must be >= 1")
    if any(c < 0 for c in nodes):
        raise GraphValidationError(f"Graph {graph_id!r}: object class ids must be >= 0")

    n = len(nodes)
    seen: Dict[Pair, int] = {}
    edges: List[Edge] = []
    for edge in edges_in or ():
        if len(edge) != 3:
            raise GraphValidationError(f"Graph {graph_id!r}: edge {edge!r} is not a triple")
        s, o, p = (_as_int(v, "edge field", graph_id) for v in edge)
        if not (0 <= s < n and 0 <= o < n):
            raise GraphValidationError(
                f"Graph {graph_id!r}: edge ({s}, {o}) out of range for {n} nodes"
            )
        if s == o:
            raise GraphValidationError(f"Graph {graph_id!r}: self-loop on node {s}")
        if p < 1:
            raise GraphValidationError(
                f"Graph {graph_id!r}: predicate {p} is reserved for BG or invalid"
            )
        if (s, o) in seen:
            continue
        seen[(s, o)] = p
        edges.append((s, o, p))

    return SceneGraph(graph_id=graph_id, nodes=nodes, fg_edges=tuple(edges))


@dataclass(frozen=True)
class Batch:
    """
    Scene graphs treated as one loss unit.

    No pairs exist across graphs, so m_bg = sum N_g(N_g - 1) - m_fg.
    density is None when the batch has no pairs at all.
    """

    graphs: Tuple[SceneGraph, ...]
    n_total: int
    m_fg: int
    m_bg: int
    density: Optional[float]
    node_offsets: Tuple[int, ...] = field(default=(), repr=False)

    @property
    def num_pairs(self) -> int:
        return self.m_fg + self.m_bg

    def fg_keys(self) -> List[EdgeKey]:
        """(graph position, subject, object) per FG edge, in batch order."""
        return [(g_idx, s, o) for g_idx, g in enumerate(self.graphs) for s, o, _ in g.fg_edges]

    def bg_keys(self) -> List[EdgeKey]:
        """(graph position, i, j) per BG pair, in canonical pair order."""
        keys: List[EdgeKey] = []
        for g_idx, g in enumerate(self.graphs):
            fg = g.edge_map
            keys.extend((g_idx, i, j) for i, j in all_pairs(g.num_nodes) if (i, j) not in fg)
        return keys


def make_batch(graphs: Iterable[SceneGraph]) -> Batch:
    """
    Aggregate graphs into a Batch.

    Raises:
        DegenerateInputError: On an empty sequence
    """
    graphs = tuple(graphs)
    if not graphs:
        raise DegenerateInputError("Cannot build a batch from an empty graph sequence")

    offsets = []
    n_total = m_fg = pairs = 0
    for g in graphs:
        offsets.append(n_total)
        n_total += g.num_nodes
        m_fg += g.m_fg
        pairs += num_pairs(g.num_nodes)

    m_bg = pairs - m_fg
    density = m_fg / pairs if pairs > 0 else None
    return Batch(
        graphs=graphs,
        n_total=n_total,
        m_fg=m_fg,
        m_bg=m_bg,
        density=density,
        node_offsets=tuple(offsets),
    )


def graph_density(g: Union[SceneGraph, Batch]) -> float:
    """
    Fraction of ordered pairs that carry an FG edge.

    Raises:
        DegenerateInputError: When the input has no ordered pairs
    """
    if isinstance(g, Batch):
        m_fg, pairs = g.m_fg, g.num_pairs
    else:
        m_fg, pairs = g.m_fg, num_pairs(g.num_nodes)
    if pairs == 0:
        raise DegenerateInputError("Density is undefined for inputs without node pairs")
    return m_fg / pairs


def enumerate_bg_pairs(g: SceneGraph) -> FrozenSet[Pair]:
    """Ordered pairs of g without an FG edge."""
    fg = g.edge_map
    return frozenset(pair for pair in all_pairs(g.num_nodes) if pair not in fg)


def filter_graphs(
    graphs: Iterable[SceneGraph],
    min_nodes: Optional[int] = None,
    max_nodes: Optional[int] = None,
) -> List[SceneGraph]:
    """Keep graphs with min_nodes <= N <= max_nodes, preserving order."""
    lo = min_nodes if min_nodes is not None else 0
    hi = max_nodes if max_nodes is not None else np.inf
    if lo > hi:
        raise ConfigurationError(f"min_nodes ({min_nodes}) exceeds max_nodes ({max_nodes})")
    return [g for g in graphs if lo <= g.num_nodes <= hi]


def exclude_predicates(graphs: Iterable[SceneGraph], predicate_ids: Iterable[int]) -> List[SceneGraph]:
    """Drop FG edges whose predicate is in predicate_ids; nodes are kept."""
    excluded = frozenset(int(p) for p in predicate_ids)
    return [
        SceneGraph(g.graph_id, g.nodes, tuple(e for e in g.fg_edges if e[2] not in excluded))
        for g in graphs
    ]


def batch_density_profile(
    graphs: Sequence[SceneGraph],
    batch_sizes: Sequence[int],
    seed: int = 0,
) -> pd.DataFrame:
    """
    Batch density statistics for several batch sizes.

    For each batch size the dataset is shuffled with a seeded generator
    and chunked into consecutive batches. Batches without pairs are
    ignored.

    Returns:
        DataFrame with batch_size, batches, d_mean, d_std, d_min, d_max
    """
    if not graphs:
        raise DegenerateInputError("Cannot profile an empty dataset")

    rows = []
    for size in batch_sizes:
        if size < 1:
            raise ConfigurationError(f"Batch size must be >= 1, got {size}")
        order = np.random.default_rng(seed).permutation(len(graphs))
        densities = []
        for start in range(0, len(order), size):
            batch = make_batch(graphs[i] for i in order[start:start + size])
            if batch.density is not None:
                densities.append(batch.density)
        d = np.asarray(densities, dtype=float)
        rows.append({
            "batch_size": int(size),
            "batches": int(d.size),
            "d_mean": float(d.mean()) if d.size else np.nan,
            "d_std": float(d.std()) if d.size else np.nan,
            "d_min": float(d.min()) if d.size else np.nan,
            "d_max": float(d.max()) if d.size else np.nan,
        })
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class StatsReport:
    """Dataset statistics in the shape of the usual dataset tables."""

    image_count: int
    unique_triplet_count: int
    total_triplet_count: int
    n_min: int
    n_max: int
    n_mean: float
    n_std: float
    d_min: Optional[float]
    d_max: Optional[float]
    d_mean: Optional[float]
    d_std: Optional[float]
    zs_unique: Optional[int] = None
    zs_total: Optional[int] = None
    zs_images: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def to_frame(self) -> pd.DataFrame:
        """One-row table: images, triplets, N min-max / avg±std, d min-max / avg±std, zero-shot."""

        def _fmt(value: Optional[float], digits: int) -> str:
            return "n/a" if value is None else f"{value:.{digits}f}"

        row = {
            "images": self.image_count,
            "triplets_unique": self.unique_triplet_count,
            "triplets_total": self.total_triplet_count,
            "N_min_max": f"{self.n_min}-{self.n_max}",
            "N_avg_std": f"{self.n_mean:.1f}±{self.n_std:.1f}",
            "d_min_max": f"{_fmt(self.d_min, 3)}-{_fmt(self.d_max, 3)}",
            "d_avg_std": f"{_fmt(self.d_mean, 3)}±{_fmt(self.d_std, 3)}",
        }
        if self.zs_unique is not None:
            row["zs_unique"] = self.zs_unique
            row["zs_total"] = self.zs_total
            row["zs_images"] = self.zs_images
        return pd.DataFrame([row])


def dataset_stats(
    dataset: Sequence[SceneGraph],
    train_counts: Optional["TripletCounts"] = None,
) -> StatsReport:
    """
    Per-graph node-count and density statistics of a dataset.

    Graphs with N <= 1 have no density and are left out of the density
    statistics. Standard deviations are population (ddof=0).

    Args:
        dataset: Scene graphs
        train_counts: Optional training triplet counts for zero-shot columns

    Returns:
        StatsReport

    Raises:
        DegenerateInputError: On an empty dataset
    """
    if not dataset:
        raise DegenerateInputError("Cannot compute statistics of an empty dataset")

    frame = pd.DataFrame({
        "n": [g.num_nodes for g in dataset],
        "m_fg": [g.m_fg for g in dataset],
    })
    frame["pairs"] = frame["n"] * (frame["n"] - 1)
    with_pairs = frame[frame["pairs"] > 0]
    d = with_pairs["m_fg"] / with_pairs["pairs"]

    triplets = [t for g in dataset for t in g.triplets()]

    zs_unique = zs_total = zs_images = None
    if train_counts is not None:
        from .freq import zero_shot_set

        zs = zero_shot_set(train_counts, dataset, 0)
        zs_unique = len(zs)
        zs_total = sum(1 for t in triplets if t in zs)
        zs_images = sum(1 for g in dataset if any(t in zs for t in g.triplets()))

    return StatsReport(
        image_count=len(dataset),
        unique_triplet_count=len(set(triplets)),
        total_triplet_count=len(triplets),
        n_min=int(frame["n"].min()),
        n_max=int(frame["n"].max()),
        n_mean=float(frame["n"].mean()),
        n_std=float(frame["n"].std(ddof=0)),
        d_min=float(d.min()) if not d.empty else None,
        d_max=float(d.max()) if not d.empty else None,
        d_mean=float(d.mean()) if not d.empty else None,
        d_std=float(d.std(ddof=0)) if not d.empty else None,
        zs_unique=zs_unique,
        zs_total=zs_total,
        zs_images=zs_images,
    )
