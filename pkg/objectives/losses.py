"""
Losses for both phases: the symmetric tri-modal contrastive objective used
in pre-training, and the similarity-softmax classifier with its
cross-entropy used in prompt tuning.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from autodiff import Tensor, cosine_matrix, log_softmax, softmax
from errors import ArgumentError, ContractError, DimensionError

LOSS_FORMS = ("categorical", "bce")
LOG_FLOOR = 1e-12


@dataclass
class FeatureBatch:
    """Row-aligned B x D features; row i of each comes from the same triplet."""

    point: Optional[Tensor] = None
    image: Optional[Tensor] = None
    text: Optional[Tensor] = None

    def __post_init__(self):
        rows = {len(t) for t in (self.point, self.image, self.text) if t is not None}
        if len(rows) > 1:
            raise DimensionError(
                "feature batch rows differ",
                *[t.shape for t in (self.point, self.image, self.text) if t is not None],
            )


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        weights = (self.alpha, self.beta, self.theta)
        if min(weights) < 0:
            raise ArgumentError(f"loss weights must be non-negative, got {weights}")
        if max(weights) <= 0:
            raise ArgumentError("at least one loss weight must be positive")


def pairwise_contrastive(h_a: Tensor, h_b: Tensor, temperature: float) -> Tensor:
    """
    Symmetric InfoNCE between two aligned batches.

    Mean over i of -1/2 log softmax_row(S/t)[i, i] - 1/2 log softmax_col(S/t)[i, i]
    with S[i, k] the cosine similarity of h_a[i] and h_b[k].
    """
    if temperature <= 0:
        raise ArgumentError(f"temperature must be positive, got {temperature}")
    if h_a.shape != h_b.shape or h_a.ndim != 2:
        raise DimensionError("contrastive inputs must be matching B x D matrices", h_a.shape, h_b.shape)
    scores = cosine_matrix(h_a, h_b) * (1.0 / temperature)
    diag = (np.arange(len(h_a)), np.arange(len(h_a)))
    rows = log_softmax(scores, axis=1)[diag]
    cols = log_softmax(scores, axis=0)[diag]
    return -(rows * 0.5 + cols * 0.5).mean()


def total_contrastive(batch: FeatureBatch, weights: LossWeights, temperature: float) -> Tensor:
    """alpha L(I,T) + beta L(I,P) + theta L(P,T)."""
    missing = [name for name in ("point", "image", "text") if getattr(batch, name) is None]
    if missing:
        raise ArgumentError(f"feature batch is missing modalities: {', '.join(missing)}")
    return (
        pairwise_contrastive(batch.image, batch.text, temperature) * weights.alpha
        + pairwise_contrastive(batch.image, batch.point, temperature) * weights.beta
        + pairwise_contrastive(batch.point, batch.text, temperature) * weights.theta
    )


def class_distribution(
    h_pa: Tensor,
    text_feats: Tensor,
    temperature: float = 1.0,
    logit_scale: Optional[Tensor] = None,
) -> Tensor:
    """
    Softmax over classes of cosine(h_pa, h_j^T) / temperature.

    Accepts a single feature [D] or a batch [B, D]; when `logit_scale` is
    given the cosines are multiplied by exp(logit_scale) instead.
    """
    if len(text_feats) < 2:
        raise ArgumentError(f"classification needs at least 2 classes, got {len(text_feats)}")
    if temperature <= 0:
        raise ArgumentError(f"temperature must be positive, got {temperature}")
    single = h_pa.ndim == 1
    points = h_pa.reshape(1, h_pa.shape[0]) if single else h_pa
    sims = cosine_matrix(points, text_feats)
    logits = sims * logit_scale.exp() if logit_scale is not None else sims * (1.0 / temperature)
    probs = softmax(logits, axis=-1)
    return probs[0] if single else probs


def tuning_loss(probs: Tensor, targets: np.ndarray, form: str = "categorical") -> Tensor:
    """
    Cross-entropy between predicted distributions and one-hot labels.

    `categorical` is the mean of -sum_j y_j log p_j; `bce` is the mean of
    the per-class binary form -sum_j [y_j log p_j + (1 - y_j) log(1 - p_j)].
    Log arguments are floored at 1e-12.
    """
    if form not in LOSS_FORMS:
        raise ArgumentError(f"unknown loss form '{form}'")
    targets = np.asarray(targets, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs.reshape(1, probs.shape[0])
        targets = targets.reshape(1, -1)
    if probs.shape != targets.shape:
        raise DimensionError("predictions and targets differ", probs.shape, targets.shape)
    drift = np.abs(probs.data.sum(axis=1) - 1.0).max()
    if drift > 1e-6:
        raise ContractError(f"prediction rows must sum to 1 (off by {drift:.3g})")

    per_class = probs.clamp_min(LOG_FLOOR).log() * targets
    if form == "bce":
        per_class = per_class + (1.0 - probs).clamp_min(LOG_FLOOR).log() * (1.0 - targets)
    return -per_class.sum(axis=1).mean()


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out
