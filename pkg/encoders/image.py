"""
Depth-image encoder f_I: a small patch transformer with mean pooling.
"""

from typing import Sequence

import numpy as np

from autodiff import Parameter, Tensor
from encoders.layers import LayerNorm, Linear, Module, TransformerBlock, gaussian
from errors import DimensionError


class ImageEncoder(Module):
    def __init__(
        self,
        size: int,
        patch: int,
        width: int,
        heads: int,
        depth: int,
        embed_dim: int,
        rng: np.random.Generator,
        mlp_ratio: int = 4,
        approximate: str = "tanh",
    ):
        super().__init__()
        self.size = size
        self.patch = patch
        self.depth = depth
        self.grid = size // patch
        self.patch_embed = Linear(patch * patch, width, rng)
        self.position_embedding = Parameter(gaussian(rng, (self.grid * self.grid, width), std=0.01))
        for i in range(depth):
            setattr(self, f"block{i}", TransformerBlock(width, heads, rng, mlp_ratio, approximate))
        self.ln_final = LayerNorm(width)
        self.projection = Linear(width, embed_dim, rng, bias=False)

    def _patches(self, images: np.ndarray) -> np.ndarray:
        b = len(images)
        g, p = self.grid, self.patch
        return images.reshape(b, g, p, g, p).transpose(0, 1, 3, 2, 4).reshape(b, g * g, p * p)

    def encode(self, images: Sequence[np.ndarray]) -> Tensor:
        """Encode a batch of H x W depth images into [B, D] features."""
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 3 or images.shape[1:] != (self.size, self.size):
            raise DimensionError("image encoder input", images.shape[1:], (self.size, self.size))
        x = self.patch_embed(Tensor(self._patches(images))) + self.position_embedding
        for i in range(self.depth):
            x = getattr(self, f"block{i}")(x)
        return self.projection(self.ln_final(x).mean(axis=1))

    def image_encode(self, depth: np.ndarray) -> Tensor:
        """h^I = f_I(I), shape [D]."""
        depth = np.asarray(depth, dtype=np.float64)
        if depth.shape != (self.size, self.size):
            raise DimensionError("image shape", depth.shape, (self.size, self.size))
        return self.encode([depth])[0]
