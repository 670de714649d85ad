"""
sgglab - scene-graph generation laboratory.

Synthetic scene graphs, FG/BG loss formulations, a minimal trainable
classifier and recall metrics for studying graph density and the long
tail of relationship triplets.
"""

from .core import SceneGraph, dataset_stats, graph_density, make_batch, validate_graph
from .freq import FreqModel, fit_freq, freq_predict, triplet_counts, zero_shot_set
from .losses import LOSS_PRESETS, LossConfig, LossVariant, compute_loss, per_edge_weights
from .metrics import MetricReport, Prediction, Task, recall_suite
from .model import ClassifierModel, FeatureBundle, TrainConfig, train
from .synth import WorldConfig, make_dataset, make_world

__version__ = "1.0.0"

__all__ = [
    "ClassifierModel",
    "FeatureBundle",
    "FreqModel",
    "LOSS_PRESETS",
    "LossConfig",
    "LossVariant",
    "MetricReport",
    "Prediction",
    "SceneGraph",
    "Task",
    "TrainConfig",
    "WorldConfig",
    "compute_loss",
    "dataset_stats",
    "fit_freq",
    "freq_predict",
    "graph_density",
    "make_batch",
    "make_dataset",
    "make_world",
    "per_edge_weights",
    "recall_suite",
    "train",
    "triplet_counts",
    "validate_graph",
    "zero_shot_set",
]
