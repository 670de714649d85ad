"""Tests for the synthetic world and dataset generator."""

import numpy as np
import pytest

from sgglab.core import dataset_stats, graph_density
from sgglab.freq import triplet_counts, zero_shot_set
from sgglab.synth import (
    WorldConfig,
    density_profile,
    make_dataset,
    make_world,
    sample_graph,
)
from sgglab.utils.exceptions import ConfigurationError, GenerationError


def tiny(**overrides) -> WorldConfig:
    values = dict(c_obj=5, c_pred=4, n_min=3, n_max=7, feature_dim=8, seed=1)
    values.update(overrides)
    return WorldConfig(**values)


class TestDensityProfile:

    @pytest.mark.parametrize(
        "profile, n, expected",
        [("vg", 11, 6), ("vg", 5, 2), ("vg", 4, 2), ("vg", 2, 1), ("gqa", 3, 6), ("gqa", 10, 80), ("vg", 1, 0)],
    )
    def test_edge_counts(self, profile, n, expected):
        assert density_profile(profile, n) == expected

    def test_vg_density_falls_with_size(self):
        d = [density_profile("vg", n) / (n * (n - 1)) for n in (4, 8, 16, 32)]
        assert all(a > b for a, b in zip(d, d[1:]))

    def test_unknown_profile(self):
        with pytest.raises(ConfigurationError):
            density_profile("coco", 5)


class TestWorldConfig:

    @pytest.mark.parametrize(
        "overrides",
        [
            {"c_obj": 1}, {"c_pred": 1}, {"profile": "coco"}, {"n_min": 0}, {"n_min": 8, "n_max": 7},
            {"holdout_fraction": 0.6}, {"noise_scale": -0.1}, {"zipf_exponent": -1.0}, {"feature_dim": 0},
            {"large_graph_zipf": -0.5},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigurationError):
            tiny(**overrides)

    def test_from_config_ignores_missing_overrides(self):
        cfg = WorldConfig.from_config({"c_obj": 7, "profile": "gqa", "unrelated": 1}, seed=4, c_pred=None)
        assert (cfg.c_obj, cfg.profile, cfg.seed, cfg.c_pred) == (7, "gqa", 4, 10)
        assert WorldConfig.from_config(cfg.to_dict()) == cfg


class TestMakeWorld:

    def test_deterministic(self):
        a, b = make_world(tiny()), make_world(tiny())
        np.testing.assert_array_equal(a.rel_table, b.rel_table)
        np.testing.assert_array_equal(a.obj_embeddings, b.obj_embeddings)
        assert a.holdout == b.holdout

    def test_tables_are_distributions(self):
        world = make_world(tiny(holdout_fraction=0.2))
        for table in (world.rel_table, world.train_table):
            np.testing.assert_array_equal(table[:, :, 0], 0.0)
            np.testing.assert_allclose(table.sum(axis=2), 1.0)

    def test_zipf_zero_is_uniform(self):
        world = make_world(tiny(zipf_exponent=0.0))
        np.testing.assert_allclose(world.obj_prior, 1 / 5)
        np.testing.assert_allclose(world.rel_table[:, :, 1:], 1 / 4)

    def test_long_tail_rows(self):
        world = make_world(tiny(zipf_exponent=1.0))
        row = np.sort(world.rel_table[2, 3, 1:])[::-1]
        np.testing.assert_allclose(row, np.array([1, 1 / 2, 1 / 3, 1 / 4]) / (25 / 12))

    def test_holdout_size_and_support(self):
        world = make_world(tiny(holdout_fraction=0.2))
        assert len(world.holdout) == round(0.2 * 5 * 5 * 4)
        for s, p, o in world.holdout:
            assert 1 <= p <= 4
            assert world.train_table[s, o, p] == 0.0
            assert world.rel_table[s, o, p] > 0.0
        # every pair keeps a trainable predicate
        assert np.all(world.train_table[:, :, 1:].max(axis=2) > 0)

    def test_no_holdout(self):
        world = make_world(tiny(holdout_fraction=0.0))
        assert world.holdout == frozenset()
        np.testing.assert_array_equal(world.train_table, world.rel_table)

    def test_holdout_too_small_for_support(self):
        with pytest.raises(GenerationError):
            make_world(tiny(c_obj=2, c_pred=2, holdout_fraction=0.01))

    def test_orthonormal_embeddings(self):
        world = make_world(tiny())
        np.testing.assert_allclose(world.obj_embeddings @ world.obj_embeddings.T, np.eye(5), atol=1e-12)
        np.testing.assert_allclose(world.pred_embeddings @ world.pred_embeddings.T, np.eye(5), atol=1e-12)
        assert (world.node_dim, world.edge_dim) == (8, 24)

    def test_large_graph_table(self):
        world = make_world(tiny(n_max=14, large_graph_nodes=10, large_graph_zipf=0.0))
        assert world.table_for("test", 11) is world.large_rel_table
        assert world.table_for("train", 10) is world.train_table
        np.testing.assert_allclose(world.large_rel_table[:, :, 1:], 1 / 4)


class TestSampleGraph:

    def test_sizes_and_edge_counts(self):
        world = make_world(tiny())
        rng = np.random.default_rng(0)
        for k in range(50):
            g, feats = sample_graph(world, "train", rng, f"g{k}")
            assert 3 <= g.num_nodes <= 7
            assert g.m_fg == density_profile("vg", g.num_nodes)
            assert feats.node_features.shape == (g.num_nodes, 8)
            assert feats.edge_features.shape == (g.num_nodes * (g.num_nodes - 1), 24)

    def test_noise_free_features(self):
        world = make_world(tiny(noise_scale=0.0))
        g, feats = sample_graph(world, "test", np.random.default_rng(0))
        np.testing.assert_array_equal(feats.node_features, world.obj_embeddings[list(g.nodes)])
        for i, j in [(0, 1), (1, 0), (2, 1)]:
            row = feats.edge_row(g.num_nodes, i, j)
            p = g.edge_map.get((i, j), 0)
            np.testing.assert_array_equal(row[:8], world.obj_embeddings[g.nodes[i]])
            np.testing.assert_array_equal(row[8:16], world.obj_embeddings[g.nodes[j]])
            np.testing.assert_array_equal(row[16:], world.pred_embeddings[p])

    def test_noise_does_not_change_structure(self):
        quiet = make_world(tiny(noise_scale=0.0))
        noisy = make_world(tiny(noise_scale=0.5))
        rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
        a = [sample_graph(quiet, "train", rng_a)[0] for _ in range(5)]
        b = [sample_graph(noisy, "train", rng_b)[0] for _ in range(5)]
        assert a == b

    def test_size_skew(self):
        rng = np.random.default_rng(0)
        small = make_world(tiny(n_min=4, n_max=20, n_skew=2.0))
        large = make_world(tiny(n_min=4, n_max=20, n_skew=-2.0))
        mean_small = np.mean([sample_graph(small, "train", rng)[0].num_nodes for _ in range(200)])
        mean_large = np.mean([sample_graph(large, "train", rng)[0].num_nodes for _ in range(200)])
        assert mean_small < mean_large

    def test_unknown_split(self):
        with pytest.raises(ConfigurationError):
            sample_graph(make_world(tiny()), "val", np.random.default_rng(0))


class TestMakeDataset:

    def test_deterministic(self, small_world_config, small_dataset):
        again = make_dataset(make_world(small_world_config), train_images=40, test_images=20)
        assert again.train == small_dataset.train
        assert again.test == small_dataset.test
        assert again.manifest == small_dataset.manifest
        for gid, bundle in small_dataset.features.items():
            np.testing.assert_array_equal(again.features[gid].edge_features, bundle.edge_features)

    def test_ids_and_features(self, small_dataset):
        assert small_dataset.train[0].graph_id == "train_000000"
        assert small_dataset.test[-1].graph_id == "test_000019"
        assert set(small_dataset.features) == {g.graph_id for g in small_dataset.train + small_dataset.test}

    def test_train_never_sees_holdout(self, small_dataset):
        holdout = {tuple(t) for t in small_dataset.manifest["holdout"]}
        assert holdout
        assert not holdout & {t for g in small_dataset.train for t in g.triplets()}

    def test_zero_shot_manifest(self, small_dataset):
        zs = zero_shot_set(triplet_counts(small_dataset.train), small_dataset.test, 0)
        block = small_dataset.manifest["zero_shot"]
        assert block["unique"] == len(zs) >= 1
        assert block["instances"] == sum(1 for g in small_dataset.test for t in g.triplets() if t in zs)
        assert block["images"] >= 1
        assert small_dataset.manifest["splits"]["test"]["zs_unique"] == len(zs)

    def test_manifest_layout(self, small_dataset, small_world_config):
        manifest = small_dataset.manifest
        assert manifest["format_version"] == 1
        assert manifest["config"] == small_world_config.to_dict()
        assert manifest["vocab"] == {"c_obj": 6, "c_pred": 4}
        assert manifest["dims"] == {"node": 8, "edge": 24}
        assert manifest["attempts"] >= 1

    def test_without_test_split(self):
        data = make_dataset(make_world(tiny()), train_images=5, test_images=0)
        assert data.test == []
        assert "test" not in data.manifest["splits"]
        assert data.manifest["zero_shot"]["unique"] == 0

    def test_invalid_counts(self):
        world = make_world(tiny())
        with pytest.raises(ConfigurationError):
            make_dataset(world, train_images=0, test_images=5)
        with pytest.raises(ConfigurationError):
            make_dataset(world, train_images=5, test_images=-1)
        with pytest.raises(ConfigurationError):
            make_dataset(world, train_images=5, test_images=5, max_retries=0)

    def test_gives_up_without_zero_shot(self, mocker):
        world = make_world(tiny())
        mocker.patch("sgglab.synth.zero_shot_set", return_value=frozenset())
        with pytest.raises(GenerationError, match="3 attempts"):
            make_dataset(world, train_images=3, test_images=3, max_retries=3)


class TestRealism:

    def test_vg_density_range(self):
        data = make_dataset(make_world(WorldConfig(feature_dim=4, seed=2)), train_images=150, test_images=0)
        stats = dataset_stats(data.train)
        assert 0.02 <= stats.d_mean <= 0.15

    def test_small_graphs_are_denser(self):
        small = make_dataset(make_world(WorldConfig(n_min=4, n_max=10, feature_dim=4)), 80, 0)
        large = make_dataset(make_world(WorldConfig(n_min=20, n_max=32, feature_dim=4)), 80, 0)
        assert dataset_stats(small.train).d_mean > dataset_stats(large.train).d_mean
        assert max(graph_density(g) for g in large.train) < min(graph_density(g) for g in small.train)

    def test_gqa_is_denser_than_vg(self):
        vg = make_dataset(make_world(tiny(profile="vg")), 30, 0)
        gqa = make_dataset(make_world(tiny(profile="gqa")), 30, 0)
        assert dataset_stats(gqa.train).d_mean > dataset_stats(vg.train).d_mean

    def test_triplet_frequencies_are_long_tailed(self):
        world = make_world(WorldConfig(c_obj=10, c_pred=5, profile="gqa", n_min=4, n_max=10,
                                       zipf_exponent=1.5, holdout_fraction=0.0, feature_dim=4, seed=9))
        rng = np.random.default_rng(0)
        graphs, edges = [], 0
        while edges < 10_000:
            g, _ = sample_graph(world, "train", rng, f"g{len(graphs)}")
            graphs.append(g)
            edges += g.m_fg
        counts = np.sort(list(triplet_counts(graphs).counts.values()))[::-1]
        top = counts[: max(1, len(counts) // 10)]
        assert top.sum() / counts.sum() >= 0.5
