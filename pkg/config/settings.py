"""
Run configuration: a flat, validated key-value record loaded from YAML.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.templates import DEFAULT_INIT_TEMPLATE, SHAPE_KINDS
from errors import ConfigurationError

VOCABULARY_FILE = Path(__file__).with_name("vocabulary.txt")

Mode = Literal["pretrain", "tune"]
AdapterKind = Literal["none", "ffn", "ptb"]
LossForm = Literal["categorical", "bce"]
InsertPosition = Literal["front", "middle", "end"]
InitMode = Literal["random", "template"]


class RunConfig(BaseModel):
    """
    Every knob of a pre-training or tuning run.

    `mode`, `context_length`, `adapter` and `loss_form` have no defaults and
    must appear in the config file.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Mode
    context_length: int = Field(ge=1)
    adapter: AdapterKind
    loss_form: LossForm

    insert_position: InsertPosition = "middle"
    init_mode: InitMode = "random"
    init_template: str = DEFAULT_INIT_TEMPLATE
    init_std: float = Field(default=0.02, gt=0)

    tau_cls: float = Field(default=1.0, gt=0)
    tau_contrastive: float = Field(default=0.07, gt=0)
    learn_logit_scale: bool = False
    alpha: float = Field(default=1.0, ge=0)
    beta: float = Field(default=1.0, ge=0)
    theta: float = Field(default=1.0, ge=0)

    # backbone shape
    embed_dim: int = Field(default=512, ge=1)
    text_heads: int = Field(default=8, ge=1)
    text_depth: int = Field(default=2, ge=1)
    text_length: int = Field(default=72, ge=3)
    point_width: int = Field(default=384, ge=1)
    point_heads: int = Field(default=6, ge=1)
    point_depth: int = Field(default=2, ge=1)
    num_patches: int = Field(default=16, ge=1)
    patch_size: int = Field(default=8, ge=1)
    patch_hidden: int = Field(default=128, ge=1)
    num_points: int = Field(default=256, ge=8)
    image_size: int = Field(default=32, ge=1)
    image_patch: int = Field(default=8, ge=1)
    image_width: int = Field(default=256, ge=1)
    image_heads: int = Field(default=4, ge=1)
    image_depth: int = Field(default=2, ge=1)
    adapter_heads: int = Field(default=6, ge=1)
    mlp_ratio: int = Field(default=4, ge=1)
    gelu_approximation: Literal["tanh", "exact"] = "tanh"

    # optimization
    batch_size: int = Field(default=32, ge=1)
    steps: int = Field(default=300, ge=0)
    learning_rate: Optional[float] = Field(default=None, ge=0)
    weight_decay: float = Field(default=0.05, ge=0)
    warmup_fraction: float = Field(default=0.1, ge=0, le=1)
    grad_clip: float = Field(default=1.0, gt=0)

    # seeds
    seed: int = 0
    data_seed: int = 0

    # data
    dataset: Literal["synthetic", "off"] = "synthetic"
    data_root: Optional[str] = None
    class_names: Optional[List[str]] = None
    train_per_class: int = Field(default=64, ge=1)
    test_per_class: int = Field(default=32, ge=1)
    point_noise: float = Field(default=0.01, ge=0)
    fraction: float = Field(default=1.0, gt=0, le=1)
    shots: Optional[int] = Field(default=None, ge=1)

    progress: bool = True

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        from encoders.text import split_words

        pairs = [
            ("embed_dim", self.embed_dim, "text_heads", self.text_heads),
            ("point_width", self.point_width, "point_heads", self.point_heads),
            ("point_width", self.point_width, "adapter_heads", self.adapter_heads),
            ("image_width", self.image_width, "image_heads", self.image_heads),
        ]
        for width_key, width, heads_key, heads in pairs:
            if width % heads:
                raise ValueError(f"{width_key}={width} is not divisible by {heads_key}={heads}")
        if self.text_length < self.context_length + 3:
            raise ValueError(
                f"text_length={self.text_length} cannot hold context_length={self.context_length} "
                "plus class, start and end tokens"
            )
        if self.num_patches > self.num_points or self.patch_size > self.num_points:
            raise ValueError("num_patches and patch_size must not exceed num_points")
        if self.image_size % self.image_patch:
            raise ValueError(f"image_size={self.image_size} is not divisible by image_patch={self.image_patch}")
        if self.init_mode == "template" and len(split_words(self.init_template)) > self.context_length:
            raise ValueError(
                f"init_template has {len(split_words(self.init_template))} words, "
                f"longer than context_length={self.context_length}"
            )
        if self.dataset == "off" and not self.data_root:
            raise ValueError("dataset 'off' requires data_root")
        if self.shots is not None and self.fraction < 1.0:
            raise ValueError("shots and fraction < 1 are mutually exclusive")
        if self.class_names is not None and len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class_names must be unique")
        if self.alpha == self.beta == self.theta == 0:
            raise ValueError("at least one of alpha, beta, theta must be positive")
        return self

    @property
    def lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 1e-3 if self.mode == "pretrain" else 5e-4

    def resolved_class_names(self) -> List[str]:
        return list(self.class_names) if self.class_names else list(SHAPE_KINDS)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def with_overrides(self, **overrides) -> "RunConfig":
        """Validated copy with some keys replaced."""
        data = self.to_dict()
        data.update(overrides)
        return RunConfig.model_validate(data)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 over the canonical JSON of the resolved config."""
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str, **overrides) -> RunConfig:
    """
    Load a flat YAML config.

    Args:
        path: Path to the YAML file
        overrides: Keys applied over the file contents (e.g. CLI flags)

    Returns:
        Validated RunConfig

    Raises:
        FileNotFoundError: If the file is missing
        ConfigurationError: If the file is not a flat mapping
        pydantic.ValidationError: If any field is invalid
    """
    with open(path, "r") as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a key-value mapping")
    nested = [key for key, value in raw.items() if isinstance(value, dict)]
    if nested:
        raise ConfigurationError(f"{path}: config must be flat, nested keys: {nested}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if raw.get("dataset") == "off" and not raw.get("data_root"):
        raw["data_root"] = os.getenv("PPT_DATA_ROOT")
    return RunConfig.model_validate(raw)


def default_out_dir() -> str:
    return os.getenv("PPT_OUT_DIR", "runs")
