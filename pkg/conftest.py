"""Shared fixtures for the sgglab test suite."""

from typing import Callable, List

import numpy as np
import pytest

from sgglab.core import SceneGraph, all_pairs
from sgglab.loaders import DatasetLoader
from sgglab.synth import GeneratedDataset, WorldConfig, make_dataset, make_world

collect_ignore = ["examples"]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long directional reproductions (deselect with -m 'not slow')")


def random_graph(
    rng: np.random.Generator,
    graph_id: str,
    n_min: int = 1,
    n_max: int = 6,
    c_obj: int = 4,
    c_pred: int = 3,
    max_density: float = 0.5,
) -> SceneGraph:
    """Random valid graph with a random share of its ordered pairs labelled."""
    n = int(rng.integers(n_min, n_max + 1))
    nodes = tuple(int(c) for c in rng.integers(0, c_obj, size=n))
    pairs = all_pairs(n)
    m = int(rng.integers(0, int(max_density * len(pairs)) + 1)) if pairs else 0
    chosen = sorted(rng.choice(len(pairs), size=m, replace=False)) if m else []
    edges = tuple((pairs[k][0], pairs[k][1], int(rng.integers(1, c_pred + 1))) for k in chosen)
    return SceneGraph(graph_id, nodes, edges)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def make_graphs() -> Callable[..., List[SceneGraph]]:
    """Factory: make_graphs(rng, count, prefix='g', **random_graph kwargs)."""

    def _make(rng: np.random.Generator, count: int, prefix: str = "g", **kwargs) -> List[SceneGraph]:
        return [random_graph(rng, f"{prefix}{k}", **kwargs) for k in range(count)]

    return _make


@pytest.fixture
def toy_graph() -> SceneGraph:
    # three nodes, two FG edges
    return SceneGraph("toy", (0, 1, 2), ((0, 1, 1), (1, 2, 2)))


@pytest.fixture(scope="session")
def small_world_config() -> WorldConfig:
    return WorldConfig(
        c_obj=6,
        c_pred=4,
        n_min=3,
        n_max=8,
        zipf_exponent=1.0,
        holdout_fraction=0.1,
        feature_dim=8,
        noise_scale=0.1,
        seed=3,
    )


@pytest.fixture(scope="session")
def small_dataset(small_world_config) -> GeneratedDataset:
    return make_dataset(make_world(small_world_config), train_images=40, test_images=20)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, small_dataset):
    directory = tmp_path_factory.mktemp("dataset")
    DatasetLoader(directory).save(
        small_dataset.train, small_dataset.test, small_dataset.features, small_dataset.manifest
    )
    return directory
