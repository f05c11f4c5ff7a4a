"""
Training steps and loops for both phases, parameter accounting and the
frozen-parameter checks.
"""

import logging
from collections import OrderedDict
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from data.dataset import Dataset, Triplet
from errors import ConfigurationError
from objectives.losses import FeatureBatch, LossWeights, one_hot, total_contrastive, tuning_loss
from orchestrator.model import FROZEN_PREFIXES, PptModel
from orchestrator.optimizer import OptimizerState

logger = logging.getLogger(__name__)


def check_freezing(model: PptModel) -> None:
    """Raise if a parameter that must stay frozen in this mode is trainable."""
    violations = model.frozen_violations()
    if violations:
        raise ConfigurationError(
            f"{len(violations)} parameters must be frozen in {model.cfg.mode} mode, e.g. {violations[:3]}"
        )


def count_learnable(model) -> Tuple[int, Dict[str, int]]:
    """
    Trainable scalar count, total and grouped by the first name component
    ('prompt', 'adapter', 'point_encoder', ...).
    """
    groups: Dict[str, int] = OrderedDict()
    for name, param in model.named_parameters():
        if param.trainable:
            group = name.split(".", 1)[0]
            groups[group] = groups.get(group, 0) + param.size
    return sum(groups.values()), dict(groups)


def parameter_digests(model, prefixes: Optional[Sequence[str]] = None) -> Dict[str, str]:
    return {
        name: p.digest()
        for name, p in model.named_parameters()
        if prefixes is None or name.startswith(tuple(prefixes))
    }


def verify_unchanged(before: Dict[str, str], after: Dict[str, str]) -> None:
    changed = [name for name, digest in before.items() if after.get(name) != digest]
    if changed:
        raise ConfigurationError(f"frozen parameters changed during training: {changed[:3]}")


def batch_indices(n: int, batch_size: int, seed: int) -> Iterator[np.ndarray]:
    """Endless stream of minibatches, reshuffled every pass."""
    rng = np.random.default_rng(seed)
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start : start + batch_size]


def pretrain_step(model: PptModel, batch: Sequence[Triplet], opt: OptimizerState) -> float:
    """One contrastive update of the point encoder; returns the loss."""
    check_freezing(model)
    cfg = model.cfg
    opt.zero_grad()
    features = FeatureBatch(
        point=model.point_embeddings([t.points for t in batch]),
        image=model.image_features([t.image for t in batch]),
        text=model.caption_features([t.caption for t in batch]),
    )
    loss = total_contrastive(features, LossWeights(cfg.alpha, cfg.beta, cfg.theta), cfg.tau_contrastive)
    loss.backward()
    opt.step()
    return loss.item()


def tune_step(model: PptModel, clouds: Sequence[np.ndarray], labels: Sequence[int], opt: OptimizerState) -> float:
    """One update of the prompt contexts and adapter; returns the loss."""
    check_freezing(model)
    opt.zero_grad()
    probs = model.class_probabilities(clouds)
    loss = tuning_loss(probs, one_hot(labels, model.prompt.num_classes), model.cfg.loss_form)
    loss.backward()
    opt.step()
    return loss.item()


def _run_loop(
    steps: int,
    step_fn: Callable[[np.ndarray], float],
    batches: Iterator[np.ndarray],
    opt: OptimizerState,
    desc: str,
    progress: bool,
    on_step: Optional[Callable[[Dict], None]],
) -> List[Dict]:
    history = []
    bar = tqdm(range(steps), desc=desc, disable=not progress, leave=False)
    for _ in bar:
        lr = opt.learning_rate(opt.step_count)
        loss = step_fn(next(batches))
        record = {"step": opt.step_count, "loss": loss, "lr": lr}
        history.append(record)
        bar.set_postfix(loss=f"{loss:.4f}")
        if on_step is not None:
            on_step(record)
    return history


def run_pretraining(
    model: PptModel,
    triplets: Sequence[Triplet],
    opt: Optional[OptimizerState] = None,
    on_step: Optional[Callable[[Dict], None]] = None,
) -> Tuple[List[Dict], OptimizerState]:
    """
    Contrastive pre-training of the point encoder.

    Returns:
        Per-step records and the optimizer
    """
    cfg = model.cfg
    opt = opt or OptimizerState.for_model(model, cfg)
    frozen_before = parameter_digests(model, FROZEN_PREFIXES["pretrain"])
    batches = batch_indices(len(triplets), cfg.batch_size, cfg.seed)
    history = _run_loop(
        cfg.steps,
        lambda idx: pretrain_step(model, [triplets[i] for i in idx], opt),
        batches,
        opt,
        "pretrain",
        cfg.progress,
        on_step,
    )
    verify_unchanged(frozen_before, parameter_digests(model, FROZEN_PREFIXES["pretrain"]))
    if history:
        logger.info("Pre-training: loss %.4f -> %.4f over %d steps", history[0]["loss"], history[-1]["loss"], len(history))
    return history, opt


def run_tuning(
    model: PptModel,
    train: Dataset,
    opt: Optional[OptimizerState] = None,
    on_step: Optional[Callable[[Dict], None]] = None,
) -> Tuple[List[Dict], OptimizerState]:
    """
    Prompt tuning on a labeled train split.

    Returns:
        Per-step records and the optimizer
    """
    cfg = model.cfg
    opt = opt or OptimizerState.for_model(model, cfg)
    frozen_before = parameter_digests(model, FROZEN_PREFIXES["tune"])
    clouds, labels = train.clouds(), train.labels()
    batches = batch_indices(len(train), cfg.batch_size, cfg.seed)
    history = _run_loop(
        cfg.steps,
        lambda idx: tune_step(model, [clouds[i] for i in idx], labels[idx], opt),
        batches,
        opt,
        "tune",
        cfg.progress,
        on_step,
    )
    verify_unchanged(frozen_before, parameter_digests(model, FROZEN_PREFIXES["tune"]))
    if history:
        logger.info("Tuning: loss %.4f -> %.4f over %d steps", history[0]["loss"], history[-1]["loss"], len(history))
    return history, opt
