"""
Synthetic scene-graph world generator.

A World plants a long-tailed object prior and a Zipf-tilted predicate
table P(R|s,o), reserves a share of (s, p, o) compositions as a holdout
that only the test split may produce, and assigns every object and
predicate class an embedding from which noisy, learnable features are
drawn. Graph sizes follow a skewed range and FG edge counts follow a
density profile (VG-like or GQA-like).
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from .core import SceneGraph, Triplet, all_pairs, dataset_stats, num_pairs
from .freq import TripletCounts, triplet_counts, zero_shot_set
from .model import FeatureBundle
from .utils.exceptions import ConfigurationError, GenerationError
from .utils.logger import log_execution_time

logger = logging.getLogger("sgglab.synth")

PROFILES = ("vg", "gqa")
SPLITS = ("train", "test")
MANIFEST_VERSION = 1


def density_profile(profile: str, n: int) -> int:
    """
    Number of FG edges of a graph with n nodes.

    vg: round(0.5 * n); gqa: round(8 * n). Both are capped at n(n-1) and
    use round-half-to-even.
    """
    if profile == "vg":
        m = round(0.5 * n)
    elif profile == "gqa":
        m = round(8 * n)
    else:
        raise ConfigurationError(f"Unknown density profile {profile!r}; expected one of {PROFILES}")
    return min(int(m), num_pairs(n))


@dataclass(frozen=True)
class WorldConfig:
    """
    Parameters of a synthetic world.

    Attributes:
        c_obj: Object classes
        c_pred: Predicate classes (BG excluded)
        profile: FG edge count profile, 'vg' or 'gqa'
        n_min: Smallest graph size
        n_max: Largest graph size
        n_skew: P(N = k) proportional to k^(-n_skew); negative values favour large graphs
        zipf_exponent: Long-tail strength of object classes and predicate rows
        holdout_fraction: Share of compositions reserved for the test split
        feature_dim: Embedding size D (node features D, edge features 3D)
        noise_scale: Standard deviation of the Gaussian feature noise
        seed: World and dataset seed
        large_graph_nodes: Graphs above this size count as large
        large_graph_zipf: Optional exponent for predicate rows of large graphs
    """

    c_obj: int = 20
    c_pred: int = 10
    profile: str = "vg"
    n_min: int = 4
    n_max: int = 32
    n_skew: float = 0.0
    zipf_exponent: float = 1.0
    holdout_fraction: float = 0.1
    feature_dim: int = 24
    noise_scale: float = 0.1
    seed: int = 0
    large_graph_nodes: int = 10
    large_graph_zipf: Optional[float] = None

    def __post_init__(self) -> None:
        if self.c_obj < 2 or self.c_pred < 2:
            raise ConfigurationError(f"Vocabulary sizes must be >= 2, got c_obj={self.c_obj}, c_pred={self.c_pred}")
        if self.profile not in PROFILES:
            raise ConfigurationError(f"Unknown density profile {self.profile!r}; expected one of {PROFILES}")
        if not 1 <= self.n_min <= self.n_max:
            raise ConfigurationError(f"Graph size range must satisfy 1 <= n_min <= n_max, got {self.n_min}..{self.n_max}")
        if not 0.0 <= self.holdout_fraction <= 0.5:
            raise ConfigurationError(f"holdout_fraction must be in [0, 0.5], got {self.holdout_fraction}")
        if self.noise_scale < 0:
            raise ConfigurationError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.zipf_exponent < 0:
            raise ConfigurationError(f"zipf_exponent must be >= 0, got {self.zipf_exponent}")
        if self.feature_dim < 1:
            raise ConfigurationError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.large_graph_zipf is not None and self.large_graph_zipf < 0:
            raise ConfigurationError(f"large_graph_zipf must be >= 0, got {self.large_graph_zipf}")

    @classmethod
    def from_config(cls, section: Mapping[str, Any], **overrides: Any) -> "WorldConfig":
        """Build from a config section; keyword overrides that are None are ignored."""
        values = {name: section[name] for name in cls.__dataclass_fields__ if name in section}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class World:
    """
    Generative ground truth.

    Attributes:
        config: Echo of the WorldConfig
        obj_prior: [C_obj] object class distribution
        rel_table: [C_obj, C_obj, 1 + C_pred] planted P(R|s,o); column 0 (BG) is 0
        train_table: rel_table with holdout compositions removed, rows renormalized
        large_rel_table: Planted table for large graphs (None when not configured)
        large_train_table: Its training counterpart
        holdout: Reserved (s, p, o) compositions
        obj_embeddings: [C_obj, D]
        pred_embeddings: [1 + C_pred, D]; row 0 is the BG signal vector
    """

    config: WorldConfig
    obj_prior: np.ndarray
    rel_table: np.ndarray
    train_table: np.ndarray
    large_rel_table: Optional[np.ndarray]
    large_train_table: Optional[np.ndarray]
    holdout: FrozenSet[Triplet]
    obj_embeddings: np.ndarray
    pred_embeddings: np.ndarray

    @property
    def bg_embedding(self) -> np.ndarray:
        return self.pred_embeddings[0]

    @property
    def node_dim(self) -> int:
        return self.obj_embeddings.shape[1]

    @property
    def edge_dim(self) -> int:
        return 3 * self.obj_embeddings.shape[1]

    def table_for(self, split: str, n: int) -> np.ndarray:
        """Predicate table used for a graph of n nodes in the given split."""
        large = self.large_rel_table is not None and n > self.config.large_graph_nodes
        if split == "train":
            return self.large_train_table if large else self.train_table
        return self.large_rel_table if large else self.rel_table


def _zipf(size: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, size + 1, dtype=float) ** -exponent
    return weights / weights.sum()


def _tilted_table(orders: np.ndarray, exponent: float) -> np.ndarray:
    """Rows over predicates 1..C_pred with Zipf mass assigned along each row's order."""
    c_obj, _, c_pred = orders.shape
    weights = _zipf(c_pred, exponent)
    table = np.zeros((c_obj, c_obj, 1 + c_pred))
    for s in range(c_obj):
        for o in range(c_obj):
            table[s, o, 1 + orders[s, o]] = weights
    return table


def _without_holdout(table: np.ndarray, holdout: FrozenSet[Triplet]) -> np.ndarray:
    train = table.copy()
    for s, p, o in holdout:
        train[s, o, p] = 0.0
    return train / train.sum(axis=2, keepdims=True)


def _embeddings(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Unit vectors; orthonormal when count <= dim."""
    if count <= dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        return q[:, :count].T.copy()
    vectors = rng.standard_normal((count, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _draw_holdout(rng: np.random.Generator, cfg: WorldConfig) -> FrozenSet[Triplet]:
    """Reserve round(fraction * |support|) compositions, leaving every (s, o) row at least one predicate."""
    support = cfg.c_obj * cfg.c_obj * cfg.c_pred
    target = int(round(cfg.holdout_fraction * support))
    if cfg.holdout_fraction > 0 and target == 0:
        raise GenerationError(
            f"holdout_fraction={cfg.holdout_fraction} reserves no composition out of {support}; support too small"
        )
    if target == 0:
        return frozenset()

    remaining = np.full((cfg.c_obj, cfg.c_obj), cfg.c_pred)
    holdout: List[Triplet] = []
    for flat in rng.permutation(support):
        s, rest = divmod(int(flat), cfg.c_obj * cfg.c_pred)
        o, p = divmod(rest, cfg.c_pred)
        if remaining[s, o] > 1:
            remaining[s, o] -= 1
            holdout.append((s, p + 1, o))
            if len(holdout) == target:
                return frozenset(holdout)
    raise GenerationError(f"Cannot hold out {target} compositions while keeping every pair trainable")


def make_world(cfg: WorldConfig) -> World:
    """
    Build a world deterministically from cfg.seed.

    Raises:
        GenerationError: When the holdout is infeasible for the support size
    """
    rng = np.random.default_rng([cfg.seed, 0])

    obj_prior = np.zeros(cfg.c_obj)
    obj_prior[rng.permutation(cfg.c_obj)] = _zipf(cfg.c_obj, cfg.zipf_exponent)

    orders = np.stack([
        np.stack([rng.permutation(cfg.c_pred) for _ in range(cfg.c_obj)])
        for _ in range(cfg.c_obj)
    ])
    rel_table = _tilted_table(orders, cfg.zipf_exponent)

    holdout = _draw_holdout(rng, cfg)
    train_table = _without_holdout(rel_table, holdout)

    large_rel = large_train = None
    if cfg.large_graph_zipf is not None:
        large_rel = _tilted_table(orders, cfg.large_graph_zipf)
        large_train = _without_holdout(large_rel, holdout)

    obj_embeddings = _embeddings(rng, cfg.c_obj, cfg.feature_dim)
    pred_embeddings = _embeddings(rng, 1 + cfg.c_pred, cfg.feature_dim)

    logger.debug(
        f"World seed={cfg.seed}: C_obj={cfg.c_obj}, C_pred={cfg.c_pred}, "
        f"{len(holdout)} held-out compositions"
    )
    return World(
        config=cfg,
        obj_prior=obj_prior,
        rel_table=rel_table,
        train_table=train_table,
        large_rel_table=large_rel,
        large_train_table=large_train,
        holdout=holdout,
        obj_embeddings=obj_embeddings,
        pred_embeddings=pred_embeddings,
    )


def sample_graph(
    world: World,
    split: str,
    rng: np.random.Generator,
    graph_id: str = "g",
) -> Tuple[SceneGraph, FeatureBundle]:
    """
    Draw one graph and its features.

    FG pairs are chosen uniformly among the ordered pairs and labelled
    from the split's predicate table, so the train split never produces
    a held-out composition. Node features are class embeddings plus
    noise; edge features concatenate both endpoint embeddings with the
    predicate embedding (or the BG vector) plus noise.
    """
    if split not in SPLITS:
        raise ConfigurationError(f"Unknown split {split!r}; expected one of {SPLITS}")
    cfg = world.config

    sizes = np.arange(cfg.n_min, cfg.n_max + 1)
    size_probs = sizes.astype(float) ** -cfg.n_skew
    n = int(rng.choice(sizes, p=size_probs / size_probs.sum()))

    nodes = rng.choice(cfg.c_obj, size=n, p=world.obj_prior)
    pairs = all_pairs(n)
    m_fg = density_profile(cfg.profile, n)
    chosen = np.sort(rng.choice(len(pairs), size=m_fg, replace=False)) if m_fg else np.zeros(0, dtype=np.int64)

    table = world.table_for(split, n)
    labels = np.zeros(len(pairs), dtype=np.int64)
    edges = []
    for idx in chosen:
        i, j = pairs[idx]
        p = int(rng.choice(table.shape[2], p=table[nodes[i], nodes[j]]))
        labels[idx] = p
        edges.append((i, j, p))

    noise = cfg.noise_scale
    node_features = world.obj_embeddings[nodes] + noise * rng.standard_normal((n, world.node_dim))
    if pairs:
        subj = np.asarray([i for i, _ in pairs])
        obj = np.asarray([j for _, j in pairs])
        signal = np.concatenate([
            world.obj_embeddings[nodes[subj]],
            world.obj_embeddings[nodes[obj]],
            world.pred_embeddings[labels],
        ], axis=1)
        edge_features = signal + noise * rng.standard_normal(signal.shape)
    else:
        edge_features = np.zeros((0, world.edge_dim))

    graph = SceneGraph(graph_id, tuple(int(c) for c in nodes), tuple(edges))
    return graph, FeatureBundle(graph_id, node_features, edge_features)


@dataclass(frozen=True, eq=False)
class GeneratedDataset:
    """Train/test graphs, their features keyed by graph_id, and the manifest."""

    train: List[SceneGraph]
    test: List[SceneGraph]
    features: Dict[str, FeatureBundle]
    manifest: Dict[str, Any]


def _draw_split(
    world: World,
    split: str,
    count: int,
    rng: np.random.Generator,
    features: Dict[str, FeatureBundle],
) -> List[SceneGraph]:
    graphs = []
    for k in range(count):
        graph, feats = sample_graph(world, split, rng, f"{split}_{k:06d}")
        graphs.append(graph)
        features[graph.graph_id] = feats
    return graphs


@log_execution_time(logger)
def make_dataset(
    world: World,
    train_images: int,
    test_images: int,
    max_retries: int = 10,
) -> GeneratedDataset:
    """
    Generate a train/test dataset and its manifest.

    With a non-empty holdout and a test split, generation is repeated
    (with a fresh deterministic stream per attempt) until the test split
    contains at least one zero-shot triplet instance.

    Args:
        world: World to sample from
        train_images: Training graphs (>= 1)
        test_images: Test graphs (>= 0)
        max_retries: Attempts before giving up

    Returns:
        GeneratedDataset

    Raises:
        ConfigurationError: On invalid counts
        GenerationError: When no attempt yields a zero-shot test instance
    """
    if train_images < 1 or test_images < 0:
        raise ConfigurationError(f"Need >= 1 train and >= 0 test images, got {train_images}/{test_images}")
    if max_retries < 1:
        raise ConfigurationError(f"max_retries must be >= 1, got {max_retries}")
    cfg = world.config
    require_zs = bool(world.holdout) and test_images > 0

    for attempt in range(1, max_retries + 1):
        rng = np.random.default_rng([cfg.seed, 2, attempt])
        features: Dict[str, FeatureBundle] = {}
        train = _draw_split(world, "train", train_images, rng, features)
        test = _draw_split(world, "test", test_images, rng, features)

        counts = triplet_counts(train)
        zs = zero_shot_set(counts, test, 0) if test else frozenset()
        if require_zs and not zs:
            logger.warning(f"Attempt {attempt}/{max_retries}: test split has no zero-shot triplet, regenerating")
            continue

        manifest = _manifest(world, train, test, counts, zs, attempt)
        logger.info(
            f"✓ Generated {len(train)} train / {len(test)} test graphs "
            f"({manifest['zero_shot']['instances']} zero-shot test instances)"
        )
        return GeneratedDataset(train, test, features, manifest)

    raise GenerationError(f"No zero-shot test triplet after {max_retries} attempts")


def _manifest(
    world: World,
    train: List[SceneGraph],
    test: List[SceneGraph],
    counts: TripletCounts,
    zs: FrozenSet[Triplet],
    attempts: int,
) -> Dict[str, Any]:
    cfg = world.config
    splits = {"train": dataset_stats(train).to_dict()}
    if test:
        splits["test"] = dataset_stats(test, counts).to_dict()

    test_triplets = [t for g in test for t in g.triplets()]
    return {
        "format_version": MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "vocab": {"c_obj": cfg.c_obj, "c_pred": cfg.c_pred},
        "dims": {"node": world.node_dim, "edge": world.edge_dim},
        "holdout": [list(t) for t in sorted(world.holdout)],
        "splits": splits,
        "zero_shot": {
            "unique": len(zs),
            "instances": sum(1 for t in test_triplets if t in zs),
            "images": sum(1 for g in test if any(t in zs for t in g.triplets())),
        },
        "attempts": attempts,
    }
