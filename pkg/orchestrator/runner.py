"""
Experiment runner - pre-training, tuning, evaluation, sweeps and prompt
interpretation over one RunConfig.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

from adapters.point_adapter import adapter_param_count
from config.seeds import SWEEP_AXES, SWEEP_KEYS
from config.settings import RunConfig, config_hash
from data.dataset import build_triplets, load_datasets
from errors import ArgumentError, ConfigurationError, PPTError
from evaluators.metrics import evaluate, template_ensemble_evaluate, template_fluctuation, zero_shot_evaluate
from orchestrator.checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from orchestrator.model import PptModel
from orchestrator.reporter import RunReporter
from orchestrator.trainer import count_learnable, run_pretraining, run_tuning
from prompting.prompt_learner import nearest_words

logger = logging.getLogger(__name__)


def expected_learnable(cfg: RunConfig) -> Optional[int]:
    """Closed-form trainable count when tuning: M*D + adapter (+ logit scale)."""
    if cfg.mode == "pretrain":
        return None
    return (
        cfg.context_length * cfg.embed_dim
        + adapter_param_count(cfg.adapter, cfg.point_width, cfg.adapter_heads, cfg.mlp_ratio)
        + (1 if cfg.learn_logit_scale else 0)
    )


class ExperimentRunner:
    """Runs the commands of one configuration and records their metrics."""

    def __init__(self, cfg: RunConfig, out_dir: str, reporter: Optional[RunReporter] = None):
        self.cfg = cfg
        self.out_dir = out_dir
        self.reporter = reporter or RunReporter(out_dir, config_hash(cfg))

    def _record(self, cfg: RunConfig, step: int, metrics: Dict) -> None:
        self.reporter.record(step, metrics, seeds={"init": cfg.seed, "data": cfg.data_seed}, config_hash=config_hash(cfg))

    def dry_run(self) -> Dict:
        """Build the model and count parameters without touching data or disk."""
        model = PptModel(self.cfg)
        total, groups = count_learnable(model)
        return {
            "config_hash": config_hash(self.cfg),
            "learnable": (total, groups),
            "expected_learnable": expected_learnable(self.cfg),
        }

    def run_pretrain(self) -> Dict:
        cfg = self.cfg
        if cfg.mode != "pretrain":
            raise ConfigurationError(f"pretrain needs mode 'pretrain', config has '{cfg.mode}'")
        train, _ = load_datasets(cfg)
        cfg = cfg.with_overrides(class_names=train.class_names)
        triplets = build_triplets(train, cfg.image_size, cfg.data_seed)
        model = PptModel(cfg)
        history, opt = run_pretraining(
            model, triplets, on_step=lambda r: self._record(cfg, r["step"], {"loss": r["loss"], "lr": r["lr"]})
        )
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, "pretrain.ckpt")
        save_checkpoint(model, opt, path)
        losses = (history[0]["loss"], history[-1]["loss"]) if history else (0.0, 0.0)
        return {
            "config_hash": config_hash(cfg),
            "learnable": count_learnable(model),
            "losses": losses,
            "history": history,
            "checkpoint": path,
        }

    def run_tune(
        self,
        backbone: Optional[str] = None,
        cfg: Optional[RunConfig] = None,
        save: bool = True,
        baselines: bool = True,
    ) -> Dict:
        """
        Tune prompts (and adapter) on the train split and evaluate on test.

        Args:
            backbone: Checkpoint whose encoder weights are loaded
            cfg: Configuration override (sweep cells)
            save: Write tune.ckpt
            baselines: Also report the manual-prompt baselines

        Returns:
            Summary with metrics, learnable counts and loss history
        """
        cfg = cfg or self.cfg
        if cfg.mode != "tune":
            raise ConfigurationError(f"tune needs mode 'tune', config has '{cfg.mode}'")
        train, test = load_datasets(cfg)
        cfg = cfg.with_overrides(class_names=train.class_names)
        values = read_checkpoint(backbone).params if backbone else None
        model = PptModel(cfg, backbone=values)

        total, groups = count_learnable(model)
        if total != expected_learnable(cfg):
            raise ConfigurationError(f"trainable count {total} differs from closed form {expected_learnable(cfg)}")

        summary: Dict = {"config_hash": config_hash(cfg), "learnable": (total, groups), "train_size": len(train)}
        if baselines:
            summary["baselines"] = {
                "zero_shot": zero_shot_evaluate(model, test)["overall_accuracy"],
                "template_ensemble": template_ensemble_evaluate(model, test)["overall_accuracy"],
            }

        history, opt = run_tuning(model, train)
        metrics = evaluate(model, test)
        self._record(
            cfg,
            opt.step_count,
            {
                "overall_accuracy": metrics["overall_accuracy"],
                "mean_class_accuracy": metrics["mean_class_accuracy"],
                "final_loss": history[-1]["loss"] if history else None,
                "learnable": total,
                **{f"baseline_{k}": v for k, v in summary.get("baselines", {}).items()},
            },
        )
        summary.update(
            metrics=metrics,
            history=history,
            losses=(history[0]["loss"], history[-1]["loss"]) if history else (0.0, 0.0),
            class_names=train.class_names,
        )
        if save:
            os.makedirs(self.out_dir, exist_ok=True)
            summary["checkpoint"] = os.path.join(self.out_dir, "tune.ckpt")
            save_checkpoint(model, opt, summary["checkpoint"])
        return summary

    def run_eval(self, checkpoint: str, templates: bool = False) -> Dict:
        """
        Evaluate a tuned checkpoint on the test split of its own config,
        with this runner's data source.
        """
        model, _ = load_checkpoint(checkpoint)
        if model.prompt is None:
            raise ConfigurationError(f"{checkpoint} holds no prompt learner")
        data_cfg = self.cfg.with_overrides(class_names=model.cfg.class_names)
        _, test = load_datasets(data_cfg)
        metrics = evaluate(model, test)
        self._record(
            model.cfg,
            0,
            {"overall_accuracy": metrics["overall_accuracy"], "mean_class_accuracy": metrics["mean_class_accuracy"]},
        )
        summary = {"config_hash": config_hash(model.cfg), "metrics": metrics, "class_names": test.class_names}
        if templates:
            summary["baselines"] = {row["template"]: row["overall_accuracy"] for row in template_fluctuation(model, test)}
        return summary

    def interpret(self, checkpoint: str) -> List[Dict]:
        """Nearest vocabulary word of every learned context vector."""
        model, _ = load_checkpoint(checkpoint)
        if model.prompt is None:
            raise ConfigurationError(f"{checkpoint} holds no prompt learner")
        pairs = nearest_words(model.prompt.E, model.text_encoder.vocab)
        return [{"index": i, "word": word, "distance": dist} for i, (word, dist) in enumerate(pairs)]

    def _sweep_cell(self, axis: str, value, backbone: Optional[str]) -> Dict:
        overrides = {SWEEP_KEYS[axis]: value, "progress": False}
        if axis == "few_shot":
            overrides["fraction"] = 1.0
        elif axis == "data_fraction":
            overrides["shots"] = None
        try:
            cell_cfg = self.cfg.with_overrides(**overrides)
            result = self.run_tune(backbone, cell_cfg, save=False, baselines=False)
        except (PPTError, ValueError, OSError) as e:
            logger.warning("Sweep cell %s=%s failed: %s", axis, value, e)
            return {"value": value, "error": str(e)}
        return {
            "value": value,
            "overall_accuracy": result["metrics"]["overall_accuracy"],
            "mean_class_accuracy": result["metrics"]["mean_class_accuracy"],
            "learnable": result["learnable"][0],
            "train_size": result["train_size"],
        }

    def run_sweep(self, axis: str, backbone: Optional[str] = None, workers: int = 1) -> List[Dict]:
        """
        Tune once per axis value; failed cells are recorded and skipped.

        Cells run in a thread pool of `workers`; each builds its own model.
        """
        if axis not in SWEEP_AXES:
            raise ArgumentError(f"unknown sweep axis '{axis}', expected one of {list(SWEEP_AXES)}")
        values = SWEEP_AXES[axis]
        with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
            rows = list(pool.map(lambda v: self._sweep_cell(axis, v, backbone), values))
        self.reporter.save_results(rows, f"sweep_{axis}.json")
        return rows
