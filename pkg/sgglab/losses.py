"""
Edge loss formulations.

Every variant is a combination of the mean FG cross-entropy l_fg and
the mean BG cross-entropy l_bg of a batch:

    baseline       l_node + d * l_fg + (1 - d) * l_bg
    normalized     l_node + gamma * (l_fg + (m_bg / m_fg) * l_bg)
    tuned_ab       l_node + alpha * l_fg + beta * l_bg
    tuned_lambda   l_node + lambda * (d * l_fg + (1 - d) * l_bg)

The baseline equals the flat mean over all edges. per_edge_weights
expresses each variant as a weighted sum of per-edge cross-entropies,
which is what the trainer backpropagates.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core import Batch, EdgeKey
from .utils.exceptions import ConfigurationError, DegenerateInputError, LossInputError

logger = logging.getLogger("sgglab.losses")


class LossVariant(str, Enum):
    BASELINE = "baseline"
    NORMALIZED = "normalized"
    TUNED_AB = "tuned_ab"
    TUNED_LAMBDA = "tuned_lambda"

    @classmethod
    def parse(cls, value: Union[str, "LossVariant"]) -> "LossVariant":
        """Accept enum values and CLI spellings such as 'tuned-ab'."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ConfigurationError(f"Unknown loss variant {value!r} (expected one of {choices})")


@dataclass(frozen=True)
class LossConfig:
    """
    Loss variant and its scalars; every scalar must be > 0.

    Attributes:
        variant: Loss formulation
        gamma: Scale of the normalized loss
        alpha: FG coefficient of tuned_ab
        beta: BG coefficient of tuned_ab
        lam: Edge coefficient of tuned_lambda
    """

    variant: LossVariant = LossVariant.BASELINE
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", LossVariant.parse(self.variant))
        for name in ("gamma", "alpha", "beta", "lam"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError(f"Loss scalar {name} must be > 0, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> "LossConfig":
        """Build from a config mapping (keys: variant, gamma, alpha, beta, lambda)."""
        return cls(
            variant=section.get("variant", LossVariant.BASELINE),
            gamma=section.get("gamma", 1.0),
            alpha=section.get("alpha", 1.0),
            beta=section.get("beta", 1.0),
            lam=section.get("lambda", section.get("lam", 1.0)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda": self.lam,
        }


# Configurations of the tuned-loss ablation study
LOSS_PRESETS: Dict[str, LossConfig] = {
    "baseline": LossConfig(LossVariant.BASELINE),
    "normalized": LossConfig(LossVariant.NORMALIZED),
    "normalized-g0.05": LossConfig(LossVariant.NORMALIZED, gamma=0.05),
    "normalized-g0.2": LossConfig(LossVariant.NORMALIZED, gamma=0.2),
    "lambda-20": LossConfig(LossVariant.TUNED_LAMBDA, lam=20.0),
    "lambda-5": LossConfig(LossVariant.TUNED_LAMBDA, lam=5.0),
    "ab-0.5-20": LossConfig(LossVariant.TUNED_AB, alpha=0.5, beta=20.0),
    "ab-1-5": LossConfig(LossVariant.TUNED_AB, alpha=1.0, beta=5.0),
    "ab-1-1": LossConfig(LossVariant.TUNED_AB, alpha=1.0, beta=1.0),
}


@dataclass(frozen=True)
class EdgeLossTerms:
    """Mean FG/BG cross-entropies of a batch with the counts they average over."""

    l_fg: float
    l_bg: float
    m_fg: int
    m_bg: int
    d: float


@dataclass(frozen=True)
class LossValue:
    total: float
    l_node: float
    edge_terms: EdgeLossTerms

    @property
    def edge_part(self) -> float:
        return self.total - self.l_node


@dataclass(frozen=True)
class EdgeWeights:
    """Per-edge weight shared by all FG edges and by all BG pairs of a batch."""

    fg: float
    bg: float
    m_fg: int
    m_bg: int

    @property
    def fg_sum(self) -> float:
        return self.fg * self.m_fg

    @property
    def bg_sum(self) -> float:
        return self.bg * self.m_bg

    def expand(self, batch: Batch) -> Dict[EdgeKey, float]:
        """Weight keyed by (graph position, i, j) for every FG edge and BG pair of batch."""
        weights = {key: self.fg for key in batch.fg_keys()}
        weights.update({key: self.bg for key in batch.bg_keys()})
        return weights


def terms_from_losses(fg_losses: Sequence[float], bg_losses: Sequence[float]) -> EdgeLossTerms:
    """
    EdgeLossTerms from complete per-edge loss arrays.

    Empty groups contribute a zero mean; d is 0 when there are no edges.
    """
    fg = np.asarray(fg_losses, dtype=float)
    bg = np.asarray(bg_losses, dtype=float)
    m_fg, m_bg = int(fg.size), int(bg.size)
    total = m_fg + m_bg
    return EdgeLossTerms(
        l_fg=float(fg.mean()) if m_fg else 0.0,
        l_bg=float(bg.mean()) if m_bg else 0.0,
        m_fg=m_fg,
        m_bg=m_bg,
        d=m_fg / total if total else 0.0,
    )


def _check_losses(kind: str, losses: Mapping[EdgeKey, float], expected: Sequence[EdgeKey]) -> np.ndarray:
    expected_set = set(expected)
    given = set(losses)
    missing = expected_set - given
    extra = given - expected_set
    if missing:
        raise LossInputError(f"{len(missing)} {kind} loss entries missing, e.g. {sorted(missing)[0]}")
    if extra:
        raise LossInputError(f"{len(extra)} unexpected {kind} loss entries, e.g. {sorted(extra)[0]}")
    values = np.asarray([float(losses[key]) for key in expected], dtype=float)
    if values.size and (not np.all(np.isfinite(values)) or np.any(values < 0)):
        raise LossInputError(f"{kind} losses must be finite and >= 0")
    return values


def edge_terms(
    batch: Batch,
    fg_losses: Mapping[EdgeKey, float],
    bg_losses: Mapping[EdgeKey, float],
    allow_empty_fg: bool = False,
) -> EdgeLossTerms:
    """
    Decompose per-edge losses of a batch into FG and BG means.

    Args:
        batch: Batch the losses belong to
        fg_losses: Loss per FG edge keyed by (graph position, subject, object)
        bg_losses: Loss per BG pair keyed by (graph position, i, j)
        allow_empty_fg: Accept batches without FG edges (l_fg is then 0)

    Returns:
        EdgeLossTerms

    Raises:
        LossInputError: On missing, extra, negative or non-finite entries
        DegenerateInputError: When the batch has no FG edge and allow_empty_fg is False
    """
    fg = _check_losses("FG", fg_losses, batch.fg_keys())
    bg = _check_losses("BG", bg_losses, batch.bg_keys())
    if batch.m_fg == 0 and not allow_empty_fg:
        raise DegenerateInputError("Batch has no FG edges; FG/BG decomposition is undefined")
    return terms_from_losses(fg, bg)


def flat_mean_loss(l_node: float, fg_losses: Sequence[float], bg_losses: Sequence[float]) -> float:
    """Baseline total in its flat form: l_node + mean over all edge losses."""
    edges = np.concatenate([np.asarray(fg_losses, dtype=float), np.asarray(bg_losses, dtype=float)])
    return float(l_node + (edges.sum() / edges.size if edges.size else 0.0))


def baseline_loss(l_node: float, terms: EdgeLossTerms) -> LossValue:
    total = l_node + terms.d * terms.l_fg + (1.0 - terms.d) * terms.l_bg
    return LossValue(total=float(total), l_node=float(l_node), edge_terms=terms)


def normalized_loss(l_node: float, terms: EdgeLossTerms, gamma: float = 1.0) -> LossValue:
    """
    Density-normalized loss: l_node + gamma * (l_fg + (m_bg / m_fg) * l_bg).

    Raises:
        DegenerateInputError: When m_fg is 0
        ConfigurationError: When gamma <= 0
    """
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be > 0, got {gamma}")
    if terms.m_fg == 0:
        raise DegenerateInputError("Normalized loss is undefined for batches without FG edges")
    edge = gamma * (terms.l_fg + (terms.m_bg / terms.m_fg) * terms.l_bg)
    return LossValue(total=float(l_node + edge), l_node=float(l_node), edge_terms=terms)


def tuned_loss(l_node: float, terms: EdgeLossTerms, cfg: LossConfig) -> LossValue:
    """
    Tuned variants: independent alpha/beta coefficients or one lambda on the edge term.

    Raises:
        ConfigurationError: When cfg.variant is not a tuned variant
    """
    if cfg.variant is LossVariant.TUNED_AB:
        edge = cfg.alpha * terms.l_fg + cfg.beta * terms.l_bg
    elif cfg.variant is LossVariant.TUNED_LAMBDA:
        edge = cfg.lam * (terms.d * terms.l_fg + (1.0 - terms.d) * terms.l_bg)
    else:
        raise ConfigurationError(f"tuned_loss expects a tuned variant, got {cfg.variant.value}")
    return LossValue(total=float(l_node + edge), l_node=float(l_node), edge_terms=terms)


def compute_loss(l_node: float, terms: EdgeLossTerms, cfg: LossConfig) -> LossValue:
    """Dispatch to the loss form selected by cfg.variant."""
    if cfg.variant is LossVariant.BASELINE:
        return baseline_loss(l_node, terms)
    if cfg.variant is LossVariant.NORMALIZED:
        return normalized_loss(l_node, terms, cfg.gamma)
    return tuned_loss(l_node, terms, cfg)


def per_edge_weights(batch: Any, cfg: LossConfig) -> EdgeWeights:
    """
    Per-edge weights that turn the configured loss into a weighted sum.

    l_node + sum_e weight_e * ce_e equals compute_loss for any per-edge
    losses ce_e. batch may be a Batch or a sampled edge view; only its
    m_fg and m_bg counts are used.

    Raises:
        DegenerateInputError: Normalized variant on a batch without FG edges
    """
    m_fg, m_bg = int(batch.m_fg), int(batch.m_bg)
    total = m_fg + m_bg

    if cfg.variant is LossVariant.BASELINE:
        fg = bg = 1.0 / total if total else 0.0
    elif cfg.variant is LossVariant.NORMALIZED:
        if m_fg == 0:
            raise DegenerateInputError("Normalized loss is undefined for batches without FG edges")
        # gamma * (m_bg / m_fg) * (1 / m_bg) collapses to gamma / m_fg
        fg = bg = cfg.gamma / m_fg
    elif cfg.variant is LossVariant.TUNED_AB:
        fg = cfg.alpha / m_fg if m_fg else 0.0
        bg = cfg.beta / m_bg if m_bg else 0.0
    else:
        fg = bg = cfg.lam / total if total else 0.0

    return EdgeWeights(fg=fg, bg=bg, m_fg=m_fg, m_bg=m_bg)


def fg_weight_sum(batch: Any, cfg: LossConfig) -> float:
    """Total weight the configured loss puts on the FG edges of a batch."""
    return per_edge_weights(batch, cfg).fg_sum


def weight_ratio(batch: Any, cfg: LossConfig, reference: Optional[LossConfig] = None) -> Tuple[float, float]:
    """
    (FG ratio, BG ratio) of per-edge weights of cfg against reference (baseline by default).

    For the normalized loss with gamma = 1 on a batch of density d both
    ratios equal 1 / d.
    """
    reference = reference or LossConfig(LossVariant.BASELINE)
    mine = per_edge_weights(batch, cfg)
    ref = per_edge_weights(batch, reference)
    if ref.fg == 0 or ref.bg == 0:
        raise DegenerateInputError("Reference weights are zero; ratio is undefined")
    return mine.fg / ref.fg, mine.bg / ref.bg
