"""
The three backbones assembled from a RunConfig, and the freezing switch.
"""

import logging

from config.settings import VOCABULARY_FILE, RunConfig
from encoders.image import ImageEncoder
from encoders.layers import Module, stream_rng
from encoders.point import PointEncoder
from encoders.text import TextEncoder, Vocabulary

logger = logging.getLogger(__name__)

BACKBONE_PREFIXES = ("text_encoder.", "image_encoder.", "point_encoder.")


class EncoderStack(Module):
    """f_T, f_I and f_P, all projecting into the shared dimension D."""

    def __init__(self, cfg: RunConfig, vocab: Vocabulary = None):
        super().__init__()
        vocab = vocab or Vocabulary.from_file(VOCABULARY_FILE)
        self.embed_dim = cfg.embed_dim
        self.text_encoder = TextEncoder(
            vocab,
            width=cfg.embed_dim,
            heads=cfg.text_heads,
            depth=cfg.text_depth,
            length=cfg.text_length,
            rng=stream_rng(cfg.seed, "text_encoder"),
            mlp_ratio=cfg.mlp_ratio,
            approximate=cfg.gelu_approximation,
        )
        self.image_encoder = ImageEncoder(
            size=cfg.image_size,
            patch=cfg.image_patch,
            width=cfg.image_width,
            heads=cfg.image_heads,
            depth=cfg.image_depth,
            embed_dim=cfg.embed_dim,
            rng=stream_rng(cfg.seed, "image_encoder"),
            mlp_ratio=cfg.mlp_ratio,
            approximate=cfg.gelu_approximation,
        )
        self.point_encoder = PointEncoder(
            width=cfg.point_width,
            heads=cfg.point_heads,
            depth=cfg.point_depth,
            embed_dim=cfg.embed_dim,
            num_patches=cfg.num_patches,
            patch_size=cfg.patch_size,
            rng=stream_rng(cfg.seed, "point_encoder"),
            hidden=cfg.patch_hidden,
            mlp_ratio=cfg.mlp_ratio,
            approximate=cfg.gelu_approximation,
        )

    @property
    def vocab(self) -> Vocabulary:
        return self.text_encoder.vocab


def set_frozen(stack: Module, frozen: bool) -> None:
    """
    Set the trainable flag of every Parameter in `stack`.

    Only optimizer visibility changes; forward math is unaffected.
    """
    stack.set_trainable(not frozen)
    logger.debug("%s %s", type(stack).__name__, "frozen" if frozen else "unfrozen")
