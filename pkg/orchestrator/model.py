"""
The full model: frozen encoders, optionally a prompt learner and a point
adapter, plus the memo of frozen-encoder outputs.
"""

import hashlib
import logging
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from adapters.point_adapter import build_adapter
from autodiff import Tensor, no_grad
from config.settings import RunConfig
from encoders.layers import Module, stream_rng
from encoders.stack import EncoderStack, set_frozen
from encoders.text import Vocabulary
from errors import CheckpointError, ConfigurationError
from objectives.losses import class_distribution
from prompting.prompt_learner import PromptState, class_text_features

logger = logging.getLogger(__name__)

# parameters that must stay frozen in each mode
FROZEN_PREFIXES = {
    "pretrain": ("text_encoder.", "image_encoder."),
    "tune": ("text_encoder.", "image_encoder.", "point_encoder.", "prompt.class_embeddings"),
}


def _input_key(kind: str, value) -> str:
    if isinstance(value, str):
        payload = value.encode("utf-8")
    else:
        array = np.ascontiguousarray(value, dtype=np.float64)
        payload = repr(array.shape).encode("ascii") + array.tobytes()
    return f"{kind}:{hashlib.sha256(payload).hexdigest()}"


class PptModel(EncoderStack):
    """
    Backbone plus, in tune mode, `prompt` (PromptState) and `adapter`.

    Args:
        cfg: Run configuration; `mode` decides which parameters train
        backbone: Optional name -> array values for the encoder parameters,
            loaded before the prompt is built so template initialization
            reads the loaded word embeddings
        vocab: Optional vocabulary (defaults to config/vocabulary.txt)
    """

    def __init__(self, cfg: RunConfig, backbone: Optional[Mapping[str, np.ndarray]] = None, vocab: Vocabulary = None):
        super().__init__(cfg, vocab)
        self.cfg = cfg
        self._features: Dict[str, np.ndarray] = {}
        self.prompt = None
        self.adapter = None
        if backbone is not None:
            self.load_values(backbone, prefixes=("text_encoder.", "image_encoder.", "point_encoder."))
        if cfg.mode == "tune":
            self.prompt = PromptState(
                self.text_encoder.vocab,
                cfg.resolved_class_names(),
                cfg.context_length,
                insert_position=cfg.insert_position,
                init_mode=cfg.init_mode,
                template=cfg.init_template,
                seed=cfg.seed,
                std=cfg.init_std,
                logit_scale=math.log(1.0 / cfg.tau_cls) if cfg.learn_logit_scale else None,
            )
            self.adapter = build_adapter(
                cfg.adapter,
                cfg.point_width,
                cfg.adapter_heads,
                stream_rng(cfg.seed, "adapter"),
                cfg.mlp_ratio,
                cfg.gelu_approximation,
            )
        self.bind_names()
        self.apply_freezing()

    # ------------------------------------------------------------------
    # freezing

    def apply_freezing(self) -> None:
        """Set trainable flags for the configured mode."""
        for name in ("text_encoder", "image_encoder"):
            self.set_frozen(name, True)
        self.set_frozen("point_encoder", self.cfg.mode == "tune")
        if self.prompt is not None:
            self.prompt.class_embeddings.trainable = False

    def set_frozen(self, name: str, frozen: bool) -> None:
        set_frozen(getattr(self, name), frozen)
        self.clear_feature_cache()

    def clear_feature_cache(self) -> None:
        self._features.clear()

    def frozen_violations(self) -> List[str]:
        prefixes = FROZEN_PREFIXES[self.cfg.mode]
        return [name for name, p in self.named_parameters() if p.trainable and name.startswith(prefixes)]

    # ------------------------------------------------------------------
    # parameter values

    def state_values(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_values(
        self, values: Mapping[str, np.ndarray], prefixes: Optional[Sequence[str]] = None, strict: bool = True
    ) -> None:
        """
        Copy values into parameters, optionally only those under `prefixes`.

        Raises:
            CheckpointError: Missing name (when strict) or a shape mismatch
        """
        for name, param in self.named_parameters():
            if prefixes is not None and not name.startswith(tuple(prefixes)):
                continue
            if name not in values:
                if strict:
                    raise CheckpointError(f"checkpoint has no value for '{name}'")
                continue
            value = np.asarray(values[name], dtype=np.float64)
            if value.shape != param.shape:
                raise CheckpointError(f"shape mismatch for '{name}': checkpoint {value.shape}, model {param.shape}")
            param.data = value.copy()
        self.clear_feature_cache()

    # ------------------------------------------------------------------
    # features

    def _cached(self, kind: str, encoder: Module, inputs: Sequence, encode: Callable[[List], Tensor]) -> Tensor:
        """Rows of `encode(inputs)`, memoized while `encoder` is fully frozen."""
        if any(p.trainable for p in encoder.parameters()):
            return encode(list(inputs))
        keys = [_input_key(kind, x) for x in inputs]
        missing = [i for i, key in enumerate(keys) if key not in self._features]
        if missing:
            with no_grad():
                rows = encode([inputs[i] for i in missing]).data
            for i, row in zip(missing, rows):
                self._features[keys[i]] = row
        return Tensor(np.stack([self._features[key] for key in keys]))

    def point_features(self, clouds: Sequence[np.ndarray]) -> Tensor:
        """Pooled point features h^P [B, D_point]."""
        return self._cached("point", self.point_encoder, clouds, self.point_encoder.features)

    def point_embeddings(self, clouds: Sequence[np.ndarray]) -> Tensor:
        """Adapted and projected point features [B, D]."""
        h = self.point_features(clouds)
        if self.adapter is not None:
            h = self.adapter(h)
        return self.point_encoder.project(h)

    def image_features(self, images: Sequence[np.ndarray]) -> Tensor:
        return self._cached("image", self.image_encoder, images, self.image_encoder.encode)

    def caption_features(self, captions: Sequence[str]) -> Tensor:
        return self._cached("caption", self.text_encoder, captions, self.text_encoder.encode_texts)

    def text_features(self) -> Tensor:
        """Prompted class features [S, D]."""
        if self.prompt is None:
            raise ConfigurationError("model has no prompt learner (built in pretrain mode)")
        return class_text_features(self.prompt, self.text_encoder)

    def class_probabilities(self, clouds: Sequence[np.ndarray], text_feats: Optional[Tensor] = None) -> Tensor:
        """[B, S] class distributions."""
        text_feats = self.text_features() if text_feats is None else text_feats
        scale = self.prompt.logit_scale if self.prompt is not None else None
        return class_distribution(self.point_embeddings(clouds), text_feats, self.cfg.tau_cls, scale)

    def predict(self, clouds: Sequence[np.ndarray], batch_size: int = 64) -> np.ndarray:
        with no_grad():
            text_feats = self.text_features()
            out = [
                np.argmax(self.class_probabilities(clouds[i : i + batch_size], text_feats).data, axis=1)
                for i in range(0, len(clouds), batch_size)
            ]
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
