"""
File formats of the sgglab laboratory.

Scene graphs, features and predictions are JSONL (one object per line,
UTF-8, LF). Manifests and checkpoints are JSON documents with sorted
keys. A dataset directory holds graphs.jsonl, features.jsonl,
manifest.json and triplet_counts.json; inside a dataset directory graph
ids carry their split as a prefix (train_, test_). A plain graph file is
one unsplit set whatever its ids look like.

A feature record lists edge_features positionally: row r belongs to the
r-th ordered pair in canonical row-major order, (0, 1), (0, 2), ...,
(1, 0), (1, 2), ..., the order of all_pairs and pair_index.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import numpy as np

from .core import SceneGraph, validate_graph
from .freq import FreqModel, TripletCounts, triplet_counts
from .metrics import Prediction
from .model import PARAMETER_NAMES, ClassifierModel, FeatureBundle, TrainConfig
from .utils.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    GraphValidationError,
    PredictionMismatchError,
    SGGLabError,
)
from .utils.helpers import iter_jsonl, read_json, round_array, write_json, write_jsonl
from .utils.logger import log_execution_time

logger = logging.getLogger("sgglab.loaders")

PathLike = Union[str, Path]

GRAPHS_FILE = "graphs.jsonl"
FEATURES_FILE = "features.jsonl"
MANIFEST_FILE = "manifest.json"
TRIPLET_COUNTS_FILE = "triplet_counts.json"
CHECKPOINT_VERSION = 1
FEATURE_DECIMALS = 6


def read_graphs(path: PathLike) -> List[SceneGraph]:
    """
    Read and validate a scene-graph JSONL file.

    Raises:
        GraphValidationError: On malformed lines, invalid graphs or duplicate graph ids
    """
    graphs: List[SceneGraph] = []
    seen = set()
    try:
        for line_no, record in iter_jsonl(path):
            try:
                graph = validate_graph(record)
            except (GraphValidationError, TypeError) as e:
                raise GraphValidationError(f"{path}:{line_no}: {e}")
            if graph.graph_id in seen:
                raise GraphValidationError(f"{path}:{line_no}: duplicate graph_id {graph.graph_id!r}")
            seen.add(graph.graph_id)
            graphs.append(graph)
    except ValueError as e:
        raise GraphValidationError(str(e))
    logger.debug(f"Read {len(graphs)} graphs from {path}")
    return graphs


def write_graphs(path: PathLike, graphs: Iterable[SceneGraph]) -> int:
    return write_jsonl(path, (g.to_record() for g in graphs))


def split_graphs(graphs: Iterable[SceneGraph], split: str) -> List[SceneGraph]:
    """Graphs whose id starts with '<split>_', in file order."""
    prefix = f"{split}_"
    return [g for g in graphs if g.graph_id.startswith(prefix)]


def read_features(path: PathLike) -> Dict[str, FeatureBundle]:
    """
    Read a feature JSONL file keyed by graph_id.

    Raises:
        DimensionMismatchError: On malformed records or duplicate graph ids
    """
    bundles: Dict[str, FeatureBundle] = {}
    try:
        for line_no, record in iter_jsonl(path):
            try:
                bundle = FeatureBundle(
                    graph_id=str(record["graph_id"]),
                    node_features=np.asarray(record["node_features"], dtype=float),
                    edge_features=np.asarray(record["edge_features"], dtype=float),
                )
            except (KeyError, TypeError, ValueError) as e:
                raise DimensionMismatchError(f"{path}:{line_no}: malformed feature record ({e})")
            if bundle.graph_id in bundles:
                raise DimensionMismatchError(f"{path}:{line_no}: duplicate graph_id {bundle.graph_id!r}")
            bundles[bundle.graph_id] = bundle
    except ValueError as e:
        raise DimensionMismatchError(str(e))
    return bundles


def write_features(
    path: PathLike,
    bundles: Iterable[FeatureBundle],
    decimals: int = FEATURE_DECIMALS,
) -> int:
    """
    Write features rounded to a fixed number of decimals.

    edge_features rows stay positional in canonical pair order; the
    reader recovers row (i, j) with pair_index(n, i, j).
    """
    return write_jsonl(path, (
        {
            "graph_id": b.graph_id,
            "node_features": round_array(b.node_features, decimals),
            "edge_features": round_array(b.edge_features, decimals),
        }
        for b in bundles
    ))


def read_predictions(path: PathLike) -> Dict[str, Prediction]:
    """
    Read a prediction JSONL file keyed by graph_id.

    Raises:
        PredictionMismatchError: On malformed records or duplicate graph ids
    """
    preds: Dict[str, Prediction] = {}
    try:
        for line_no, record in iter_jsonl(path):
            try:
                pred = Prediction.from_record(record)
            except PredictionMismatchError as e:
                raise PredictionMismatchError(f"{path}:{line_no}: {e}")
            except (KeyError, TypeError, ValueError) as e:
                raise PredictionMismatchError(f"{path}:{line_no}: malformed prediction record ({e})")
            if pred.graph_id in preds:
                raise PredictionMismatchError(f"{path}:{line_no}: duplicate graph_id {pred.graph_id!r}")
            preds[pred.graph_id] = pred
    except ValueError as e:
        raise PredictionMismatchError(str(e))
    return preds


def write_predictions(path: PathLike, preds: Iterable[Prediction], decimals: Optional[int] = None) -> int:
    return write_jsonl(path, (p.to_record(decimals) for p in preds))


def save_checkpoint(
    path: PathLike,
    model: ClassifierModel,
    train_config: Optional[TrainConfig] = None,
) -> None:
    """Write model parameters, frequency bias and training config as versioned JSON."""
    write_json(path, {
        "format_version": CHECKPOINT_VERSION,
        "dims": {"d_v": model.d_v, "d_e": model.d_e, "c_obj": model.c_obj, "c_pred": model.c_pred},
        "parameters": {name: getattr(model, name) for name in PARAMETER_NAMES},
        "freq_bias": model.freq_bias.to_json_dict() if model.freq_bias is not None else None,
        "rng_seed": model.rng_seed,
        "train_config": train_config.to_dict() if train_config is not None else None,
    })


def load_checkpoint(path: PathLike) -> ClassifierModel:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        ConfigurationError: On an unknown format version
        DimensionMismatchError: When parameter shapes disagree
    """
    payload = read_json(path)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(f"Unsupported checkpoint format_version {version!r} in {path}")
    dims = payload["dims"]
    params = payload["parameters"]

    def _matrix(name: str, rows: int, cols: int) -> np.ndarray:
        values = np.asarray(params[name], dtype=float)
        return values.reshape(rows, cols) if values.size == 0 else values

    freq = payload.get("freq_bias")
    return ClassifierModel(
        node_W=_matrix("node_W", dims["d_v"], dims["c_obj"]),
        node_b=np.asarray(params["node_b"], dtype=float),
        edge_W=_matrix("edge_W", dims["d_e"], 1 + dims["c_pred"]),
        edge_b=np.asarray(params["edge_b"], dtype=float),
        freq_bias=FreqModel.from_json_dict(freq) if freq is not None else None,
        rng_seed=int(payload.get("rng_seed", 0)),
    )


@dataclass
class LoadedDataset:
    """
    Contents of a dataset directory or a plain graph file.

    A plain graph file has no splits: every graph is in test and
    split_by_prefix is False.
    """

    train: List[SceneGraph] = field(default_factory=list)
    test: List[SceneGraph] = field(default_factory=list)
    features: Dict[str, FeatureBundle] = field(default_factory=dict)
    manifest: Dict[str, Any] = field(default_factory=dict)
    counts: Optional[TripletCounts] = None
    split_by_prefix: bool = True

    @property
    def c_obj(self) -> Optional[int]:
        return self.manifest.get("vocab", {}).get("c_obj")

    @property
    def c_pred(self) -> Optional[int]:
        return self.manifest.get("vocab", {}).get("c_pred")

    def select(self, split: str) -> List[SceneGraph]:
        """Graphs of 'train', 'test' or 'all'."""
        if split == "all":
            return self.train + self.test
        if split not in ("train", "test"):
            raise ConfigurationError(f"Unknown split {split!r}; expected train, test or all")
        if not self.split_by_prefix:
            raise ConfigurationError(f"A plain graph file has no {split} split; use all or a dataset directory")
        return self.train if split == "train" else self.test

    def train_counts(self) -> Optional[TripletCounts]:
        """Stored training triplet counts, else a tally of train (None without training graphs)."""
        if self.counts is not None:
            return self.counts
        return triplet_counts(self.train) if self.train else None


def read_graph_file(path: PathLike) -> LoadedDataset:
    """Read a plain graph JSONL file as one unsplit set."""
    return LoadedDataset(test=read_graphs(path), split_by_prefix=False)


def read_triplet_counts(path: PathLike) -> TripletCounts:
    """
    Read a triplet_counts.json document.

    Raises:
        SGGLabError: If the document is malformed
    """
    try:
        return TripletCounts.from_json_dict(read_json(path))
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SGGLabError(f"Malformed triplet counts {path}: {e}")


def write_triplet_counts(path: PathLike, counts: TripletCounts) -> None:
    write_json(path, counts.to_json_dict())


class DatasetLoader:
    """
    Reads and writes dataset directories.
    """

    def __init__(self, directory: PathLike):
        """
        Initialize dataset loader.

        Args:
            directory: Dataset directory
        """
        self.logger = logging.getLogger("sgglab.loaders")
        self.directory = Path(directory)

    @property
    def graphs_path(self) -> Path:
        return self.directory / GRAPHS_FILE

    @property
    def features_path(self) -> Path:
        return self.directory / FEATURES_FILE

    @property
    def manifest_path(self) -> Path:
        return self.directory / MANIFEST_FILE

    @property
    def counts_path(self) -> Path:
        return self.directory / TRIPLET_COUNTS_FILE

    @log_execution_time(logging.getLogger("sgglab.loaders"))
    def load(self, with_features: bool = True) -> LoadedDataset:
        """
        Load graphs, features, manifest and the stored training triplet counts.

        Args:
            with_features: Skip features.jsonl when False

        Returns:
            LoadedDataset

        Raises:
            SGGLabError: If a file is missing or malformed
        """
        self.logger.info(f"Loading dataset from {self.directory}")
        if not self.graphs_path.exists():
            raise GraphValidationError(f"Missing {self.graphs_path}")

        graphs = read_graphs(self.graphs_path)
        dataset = LoadedDataset(train=split_graphs(graphs, "train"), test=split_graphs(graphs, "test"))
        if len(dataset.train) + len(dataset.test) != len(graphs):
            self.logger.warning(
                f"{len(graphs) - len(dataset.train) - len(dataset.test)} graphs have no train_/test_ prefix and were ignored"
            )
        self.logger.info(f"✓ Read {len(dataset.train):,} train and {len(dataset.test):,} test graphs")

        if with_features:
            if not self.features_path.exists():
                raise DimensionMismatchError(f"Missing {self.features_path}")
            dataset.features = read_features(self.features_path)
            missing = [g.graph_id for g in graphs if g.graph_id not in dataset.features]
            if missing:
                raise DimensionMismatchError(f"{len(missing)} graphs have no features, e.g. {missing[0]!r}")
            self.logger.info(f"✓ Read features for {len(dataset.features):,} graphs")

        if self.manifest_path.exists():
            try:
                dataset.manifest = read_json(self.manifest_path)
            except ValueError as e:
                raise SGGLabError(f"Malformed manifest {self.manifest_path}: {e}")

        if self.counts_path.exists():
            dataset.counts = read_triplet_counts(self.counts_path)
            fg_edges = sum(g.m_fg for g in dataset.train)
            if dataset.counts.total() != fg_edges:
                self.logger.warning(
                    f"{self.counts_path} tallies {dataset.counts.total():,} triplets, train has {fg_edges:,} FG edges"
                )
        return dataset

    def save(
        self,
        train: List[SceneGraph],
        test: List[SceneGraph],
        features: Mapping[str, FeatureBundle],
        manifest: Mapping[str, Any],
        decimals: int = FEATURE_DECIMALS,
    ) -> Dict[str, Path]:
        """Write graphs.jsonl, features.jsonl, manifest.json and triplet_counts.json; returns the paths."""
        graphs = list(train) + list(test)
        n = write_graphs(self.graphs_path, graphs)
        write_features(self.features_path, (features[g.graph_id] for g in graphs), decimals)
        write_json(self.manifest_path, manifest)
        write_triplet_counts(self.counts_path, triplet_counts(train))
        self.logger.info(f"✓ Wrote {n:,} graphs to {self.directory}")
        return {
            "graphs": self.graphs_path,
            "features": self.features_path,
            "manifest": self.manifest_path,
            "counts": self.counts_path,
        }
