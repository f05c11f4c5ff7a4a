"""
Classification metrics for tuned models and the manual-prompt baselines.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from autodiff import Tensor, no_grad, normalize, stack
from config.templates import DEFAULT_ZERO_SHOT_TEMPLATE, get_template, template_ids
from data.captions import make_caption
from data.dataset import Dataset
from errors import ArgumentError, DataError
from objectives.losses import class_distribution

logger = logging.getLogger(__name__)


def accuracy_metrics(predictions: Sequence[int], labels: Sequence[int], num_classes: int) -> Dict:
    """
    Overall accuracy, per-class accuracy, their mean and the confusion matrix.

    Args:
        predictions: Predicted class per sample
        labels: True class per sample
        num_classes: S

    Returns:
        Dict with overall_accuracy, per_class_accuracy (None for classes
        without samples), mean_class_accuracy, confusion (S x S, rows are
        true classes) and count
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ArgumentError("cannot evaluate an empty dataset")
    if len(predictions) != len(labels):
        raise ArgumentError(f"{len(predictions)} predictions for {len(labels)} labels")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise DataError(f"label outside 0..{num_classes - 1}")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    totals = confusion.sum(axis=1)
    per_class = [float(confusion[j, j] / totals[j]) if totals[j] else None for j in range(num_classes)]
    present = [acc for acc in per_class if acc is not None]
    return {
        "overall_accuracy": float(np.trace(confusion) / len(labels)),
        "per_class_accuracy": per_class,
        "mean_class_accuracy": float(np.mean(present)),
        "confusion": confusion.tolist(),
        "count": int(len(labels)),
    }


def _check_classes(model, ds: Dataset) -> None:
    names = model.cfg.resolved_class_names()
    if list(ds.class_names) != list(names):
        raise DataError(f"dataset classes {ds.class_names} do not match the model's {names}")


def evaluate(model, ds: Dataset, batch_size: int = 64) -> Dict:
    """Accuracy of the prompted (and adapted) model on a dataset."""
    _check_classes(model, ds)
    predictions = model.predict(ds.clouds(), batch_size)
    metrics = accuracy_metrics(predictions, ds.labels(), ds.num_classes)
    logger.info("Evaluated %d samples: OA %.4f", len(ds), metrics["overall_accuracy"])
    return metrics


def manual_prompt_features(model, class_names: Sequence[str], templates: Sequence[str]) -> Tensor:
    """
    Text features of hand-written prompts, [S, D].

    Several templates are averaged after normalization, one class at a time.
    """
    with no_grad():
        per_template = [normalize(model.caption_features([make_caption(c, t) for c in class_names])) for t in templates]
        return per_template[0] if len(per_template) == 1 else stack(per_template).mean(axis=0)


def zero_shot_predict(model, clouds: Sequence[np.ndarray], text_feats: Tensor, batch_size: int = 64) -> np.ndarray:
    """Frozen point feature (no adapter) against fixed text features."""
    out = []
    with no_grad():
        for i in range(0, len(clouds), batch_size):
            points = model.point_encoder.project(model.point_features(clouds[i : i + batch_size]))
            out.append(np.argmax(class_distribution(points, text_feats, model.cfg.tau_cls).data, axis=1))
    return np.concatenate(out)


def zero_shot_evaluate(model, ds: Dataset, template_id: str = DEFAULT_ZERO_SHOT_TEMPLATE) -> Dict:
    """Accuracy of the frozen backbone with one manual prompt."""
    if get_template(template_id) is None:
        raise ArgumentError(f"unknown template '{template_id}'")
    feats = manual_prompt_features(model, ds.class_names, [template_id])
    return accuracy_metrics(zero_shot_predict(model, ds.clouds(), feats), ds.labels(), ds.num_classes)


def template_ensemble_evaluate(model, ds: Dataset, templates: Optional[Sequence[str]] = None) -> Dict:
    """Accuracy of the frozen backbone with prompts averaged over templates."""
    feats = manual_prompt_features(model, ds.class_names, list(templates or template_ids()))
    return accuracy_metrics(zero_shot_predict(model, ds.clouds(), feats), ds.labels(), ds.num_classes)


def template_fluctuation(model, ds: Dataset) -> List[Dict]:
    """Zero-shot accuracy of every shipped template, in template order."""
    rows = []
    for template_id in template_ids():
        metrics = zero_shot_evaluate(model, ds, template_id)
        rows.append(
            {
                "template": template_id,
                "text": get_template(template_id)["text"],
                "overall_accuracy": metrics["overall_accuracy"],
            }
        )
    return rows
