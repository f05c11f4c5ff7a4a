"""
Point clouds and the patch-based point transformer f_P.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from autodiff import Parameter, Tensor, concat, gelu
from encoders.layers import LayerNorm, Linear, Module, TransformerBlock, gaussian
from errors import ArgumentError, DimensionError


def normalize_points(points: np.ndarray) -> np.ndarray:
    """Center on the centroid and scale so the farthest point has norm 1."""
    points = np.asarray(points, dtype=np.float64)
    centered = points - points.mean(axis=0)
    radius = np.sqrt((centered * centered).sum(axis=1)).max()
    if radius == 0:
        raise ArgumentError("cannot normalize a point cloud whose points all coincide")
    return centered / radius


@dataclass
class PointCloud:
    """N x 3 coordinates with an optional category label."""

    points: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise DimensionError("point cloud must be N x 3", self.points.shape)

    @classmethod
    def normalized(cls, points: np.ndarray, label: Optional[int] = None) -> "PointCloud":
        return cls(normalize_points(points), label)

    def __len__(self) -> int:
        return len(self.points)


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting points lexicographically by (x, y, z)."""
    return np.lexsort((points[:, 2], points[:, 1], points[:, 0]))


def fps(points: np.ndarray, count: int, seed_index: int = 0) -> np.ndarray:
    """
    Farthest point sampling.

    Starts at `seed_index`; each next pick maximizes the distance to the
    chosen set, ties going to the lowest index.
    """
    n = len(points)
    if not 1 <= count <= n:
        raise ArgumentError(f"fps needs 1 <= G <= N, got G={count}, N={n}")
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = seed_index
    dist = ((points - points[seed_index]) ** 2).sum(axis=1)
    dist[seed_index] = -1.0
    for i in range(1, count):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        dist = np.minimum(dist, ((points - points[nxt]) ** 2).sum(axis=1))
        dist[chosen[: i + 1]] = -1.0
    return chosen


def knn_group(points: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """
    The k nearest points of each center, re-centered on it.

    Returns:
        G x k x 3 array; ties in distance go to the lowest index
    """
    if k > len(points):
        raise ArgumentError(f"knn needs k <= N, got k={k}, N={len(points)}")
    center_xyz = points[centers]
    d = ((center_xyz[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    return points[nearest] - center_xyz[:, None, :]


class PatchEmbed(Module):
    """Shared per-point MLP followed by a max over each patch."""

    def __init__(self, hidden: int, width: int, rng: np.random.Generator, approximate: str = "tanh"):
        super().__init__()
        self.approximate = approximate
        self.fc1 = Linear(3, hidden, rng)
        self.fc2 = Linear(hidden, width, rng)

    def forward(self, patches: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(patches), self.approximate)).max(axis=-2)


class PointEncoder(Module):
    """
    PointBERT-style encoder: patchify, embed patches, prepend a class token,
    run transformer blocks, pool the class token.

    `features` returns the pooled token h^P at the point width; `project`
    maps it to the shared embedding dimension.
    """

    def __init__(
        self,
        width: int,
        heads: int,
        depth: int,
        embed_dim: int,
        num_patches: int,
        patch_size: int,
        rng: np.random.Generator,
        hidden: int = 128,
        mlp_ratio: int = 4,
        approximate: str = "tanh",
    ):
        super().__init__()
        self.width = width
        self.depth = depth
        self.num_patches = num_patches
        self.patch_size = patch_size
        self.patch_embed = PatchEmbed(hidden, width, rng, approximate)
        self.pos_embed = PatchEmbed(hidden, width, rng, approximate)
        self.cls_token = Parameter(gaussian(rng, (width,)))
        self.cls_pos = Parameter(gaussian(rng, (width,)))
        for i in range(depth):
            setattr(self, f"block{i}", TransformerBlock(width, heads, rng, mlp_ratio, approximate))
        self.ln_final = LayerNorm(width)
        self.projection = Linear(width, embed_dim, rng, bias=False)

    def patchify(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Canonically sorted centers [G, 3] and re-centered patches [G, k, 3]."""
        points = np.asarray(points, dtype=np.float64)
        if len(points) < self.num_patches or len(points) < self.patch_size:
            raise ArgumentError(
                f"point cloud has {len(points)} points, needs at least "
                f"{max(self.num_patches, self.patch_size)}"
            )
        ordered = points[canonical_order(points)]
        centers = fps(ordered, self.num_patches)
        return ordered[centers], knn_group(ordered, centers, self.patch_size)

    def features(self, clouds: Sequence[np.ndarray]) -> Tensor:
        """Pooled class-token features [B, width]."""
        grouped = [self.patchify(points) for points in clouds]
        centers = Tensor(np.stack([c for c, _ in grouped]))
        patches = Tensor(np.stack([p for _, p in grouped]))

        # the centers pass through the same shape of MLP, pooled over a single point
        tokens = self.patch_embed(patches) + self.pos_embed(centers.reshape(len(clouds), self.num_patches, 1, 3))
        cls = Tensor(np.ones((len(clouds), 1, 1))) * (self.cls_token + self.cls_pos).reshape(1, 1, self.width)
        x = concat([cls, tokens], axis=1)
        for i in range(self.depth):
            x = getattr(self, f"block{i}")(x)
        return self.ln_final(x)[:, 0]

    def project(self, h: Tensor) -> Tensor:
        return self.projection(h)

    def point_encode(self, pc: PointCloud) -> Tensor:
        """h = f_P(P), shape [embed_dim]."""
        return self.project(self.features([pc.points]))[0]
