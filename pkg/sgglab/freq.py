"""
Frequency-bias baseline and triplet occurrence counting.

FreqModel tallies FG predicates per (subject class, object class) pair
and answers P(predicate | subject, object). BG never receives mass: the
model describes which predicate holds given that an edge exists.
TripletCounts tallies class-level (subject, predicate, object) triplets
and drives zero-shot and n-shot selection.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import SceneGraph, Triplet
from .utils.exceptions import ConfigurationError, DegenerateInputError, UnseenPairError

logger = logging.getLogger("sgglab.freq")

ClassPair = Tuple[int, int]


@dataclass(frozen=True)
class FreqModel:
    """
    Predicate co-occurrence table.

    Attributes:
        counts: (subject_class, object_class) -> counts of length 1 + P,
            index 0 (BG) always 0
        num_predicates: Number of predicate classes P
        smoothing: Additive constant applied at query time
    """

    counts: Mapping[ClassPair, Tuple[int, ...]]
    num_predicates: int
    smoothing: float = 0.0

    def __contains__(self, pair: ClassPair) -> bool:
        return tuple(pair) in self.counts

    def log_prior(self, num_object_classes: int) -> np.ndarray:
        """
        Dense log P(R|s,o) table of shape [C_obj, C_obj, 1 + P].

        Column 0 (BG) is 0 so it can be added to logits directly. Unseen
        pairs get the uniform distribution.

        Raises:
            ConfigurationError: If smoothing is 0 (log 0 is undefined)
        """
        if self.smoothing <= 0:
            raise ConfigurationError("Frequency bias needs smoothing > 0 to take logarithms")
        p = self.num_predicates
        table = np.full((num_object_classes, num_object_classes, 1 + p), -math.log(p))
        table[:, :, 0] = 0.0
        for (s, o), row in self.counts.items():
            if s < num_object_classes and o < num_object_classes:
                smoothed = np.asarray(row[1:], dtype=float) + self.smoothing
                table[s, o, 1:] = np.log(smoothed / smoothed.sum())
        return table

    def to_json_dict(self) -> Dict[str, Any]:
        nested: Dict[str, Dict[str, list]] = {}
        for (s, o), row in sorted(self.counts.items()):
            nested.setdefault(str(s), {})[str(o)] = list(row)
        return {
            "num_predicates": self.num_predicates,
            "smoothing": self.smoothing,
            "counts": nested,
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping[str, Any]) -> "FreqModel":
        counts = {
            (int(s), int(o)): tuple(int(c) for c in row)
            for s, inner in payload["counts"].items()
            for o, row in inner.items()
        }
        return cls(
            counts=counts,
            num_predicates=int(payload["num_predicates"]),
            smoothing=float(payload.get("smoothing", 0.0)),
        )


def fit_freq(
    train: Sequence[SceneGraph],
    smoothing: float = 0.0,
    num_predicates: Optional[int] = None,
) -> FreqModel:
    """
    Tally FG predicate co-occurrences per class pair.

    Args:
        train: Training scene graphs
        smoothing: Non-negative additive constant used at query time
        num_predicates: Predicate vocabulary size (inferred from the data when omitted)

    Returns:
        Fitted FreqModel

    Raises:
        DegenerateInputError: On an empty training set or no predicate vocabulary
        ConfigurationError: On negative smoothing or a vocabulary smaller than the data
    """
    if not train:
        raise DegenerateInputError("Cannot fit the frequency model on an empty training set")
    if smoothing < 0:
        raise ConfigurationError(f"Smoothing must be >= 0, got {smoothing}")

    tallies: Counter = Counter()
    max_predicate = 0
    for g in train:
        for s_cls, p, o_cls in g.triplets():
            tallies[(s_cls, o_cls, p)] += 1
            max_predicate = max(max_predicate, p)

    if num_predicates is None:
        num_predicates = max_predicate
    elif num_predicates < max_predicate:
        raise ConfigurationError(
            f"num_predicates={num_predicates} is smaller than observed predicate {max_predicate}"
        )
    if num_predicates < 1:
        raise DegenerateInputError("Frequency model needs at least one predicate class")

    rows: Dict[ClassPair, np.ndarray] = {}
    for (s_cls, o_cls, p), n in tallies.items():
        row = rows.setdefault((s_cls, o_cls), np.zeros(1 + num_predicates, dtype=np.int64))
        row[p] += n

    model = FreqModel(
        counts={pair: tuple(int(c) for c in row) for pair, row in sorted(rows.items())},
        num_predicates=int(num_predicates),
        smoothing=float(smoothing),
    )
    logger.debug(
        f"Fitted frequency model: {len(model.counts)} class pairs, "
        f"{sum(tallies.values())} edges, P={num_predicates}"
    )
    return model


def freq_predict(model: FreqModel, s: int, o: int) -> np.ndarray:
    """
    Distribution over predicates for a class pair.

    Returns:
        Array of length 1 + P; index 0 (BG) is 0 and the rest sums to 1

    Raises:
        UnseenPairError: Unseen pair with smoothing 0
    """
    p = model.num_predicates
    probs = np.zeros(1 + p)
    row = model.counts.get((s, o))
    if row is None:
        if model.smoothing <= 0:
            raise UnseenPairError(f"Class pair ({s}, {o}) never observed in training")
        probs[1:] = 1.0 / p
        return probs

    smoothed = np.asarray(row[1:], dtype=float) + model.smoothing
    probs[1:] = smoothed / smoothed.sum()
    return probs


def freq_argmax(model: FreqModel, s: int, o: int) -> int:
    """Most frequent predicate for a class pair; ties go to the lower id."""
    return 1 + int(np.argmax(freq_predict(model, s, o)[1:]))


@dataclass(frozen=True)
class TripletCounts:
    """Occurrences n_t of (subject_class, predicate, object_class) in training."""

    counts: Mapping[Triplet, int]

    def get(self, triplet: Triplet) -> int:
        return self.counts.get(tuple(triplet), 0)

    def __len__(self) -> int:
        return len(self.counts)

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def to_json_dict(self) -> Dict[str, Any]:
        nested: Dict[str, Dict[str, Dict[str, int]]] = {}
        for (s, p, o), n in sorted(self.counts.items()):
            nested.setdefault(str(s), {}).setdefault(str(p), {})[str(o)] = n
        return {"counts": nested}

    @classmethod
    def from_json_dict(cls, payload: Mapping[str, Any]) -> "TripletCounts":
        return cls({
            (int(s), int(p), int(o)): int(n)
            for s, by_p in payload["counts"].items()
            for p, by_o in by_p.items()
            for o, n in by_o.items()
        })


def triplet_counts(train: Iterable[SceneGraph]) -> TripletCounts:
    """Exact tally of class-level triplets over all FG edges."""
    tally = Counter(t for g in train for t in g.triplets())
    return TripletCounts(dict(sorted(tally.items())))


def zero_shot_set(
    counts: TripletCounts,
    test: Iterable[SceneGraph],
    n: float = 0,
) -> FrozenSet[Triplet]:
    """
    Distinct test triplets seen at most n times in training.

    n = 0 yields the zero-shot set; math.inf yields every test triplet.

    Raises:
        ConfigurationError: On a negative threshold
    """
    if n < 0:
        raise ConfigurationError(f"n-shot threshold must be >= 0, got {n}")
    return frozenset(t for g in test for t in g.triplets() if counts.get(t) <= n)
