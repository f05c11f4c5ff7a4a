"""
Procedural point clouds for the synthetic shape suite.

Each generator samples uniformly over the analytic surface before jitter;
unnormalized shapes live roughly in [-1, 1]^3.
"""

from typing import Callable, Dict

import numpy as np

from config.templates import SHAPE_KINDS
from data.mesh import Mesh, sample_surface_points
from encoders.point import PointCloud, normalize_points
from errors import ArgumentError

TORUS_MAJOR = 1.0
TORUS_MINOR = 0.3
HELIX_TURNS = 3

PYRAMID = Mesh(
    vertices=[[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1], [0, 0, 1]],
    faces=[[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4], [0, 2, 1], [0, 3, 2]],
)


def _unit_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    # antithetic pairs keep the centroid at the origin
    half = _unit_directions(rng, n // 2)
    parts = [half, -half]
    if n % 2:
        # swap one pair for an equilateral triple in a random plane
        parts = [half[1:], -half[1:]]
        a = half[0]
        b = np.cross(a, _unit_directions(rng, 1)[0])
        b /= np.linalg.norm(b)
        c = np.cross(a, b)
        angles = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        parts.append(np.cos(angles)[:, None] * a + np.sin(angles)[:, None] * c)
    return np.concatenate(parts)


def _cube(rng: np.random.Generator, n: int) -> np.ndarray:
    axis = rng.integers(0, 3, size=n)
    side = rng.choice([-1.0, 1.0], size=n)
    points = rng.uniform(-1.0, 1.0, size=(n, 3))
    points[np.arange(n), axis] = side
    return points


def _cylinder(rng: np.random.Generator, n: int) -> np.ndarray:
    # lateral area 4*pi, each cap pi
    part = rng.choice(3, size=n, p=[4 / 6, 1 / 6, 1 / 6])
    phi = rng.uniform(0, 2 * np.pi, size=n)
    radius = np.where(part == 0, 1.0, np.sqrt(rng.random(n)))
    z = np.where(part == 0, rng.uniform(-1, 1, size=n), np.where(part == 1, 1.0, -1.0))
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), z], axis=1)


def _cone(rng: np.random.Generator, n: int) -> np.ndarray:
    slant = np.sqrt(5.0)
    lateral = slant / (slant + 1.0)
    on_side = rng.random(n) < lateral
    phi = rng.uniform(0, 2 * np.pi, size=n)
    t = np.sqrt(rng.random(n))
    z = np.where(on_side, 1.0 - 2.0 * t, -1.0)
    return np.stack([t * np.cos(phi), t * np.sin(phi), z], axis=1)


def _torus(rng: np.random.Generator, n: int) -> np.ndarray:
    # tube angle density is proportional to R + r cos(theta)
    theta = np.empty(0)
    while len(theta) < n:
        candidate = rng.uniform(0, 2 * np.pi, size=2 * n)
        keep = rng.random(2 * n) * (TORUS_MAJOR + TORUS_MINOR) < TORUS_MAJOR + TORUS_MINOR * np.cos(candidate)
        theta = np.concatenate([theta, candidate[keep]])
    theta = theta[:n]
    phi = rng.uniform(0, 2 * np.pi, size=n)
    ring = TORUS_MAJOR + TORUS_MINOR * np.cos(theta)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), TORUS_MINOR * np.sin(theta)], axis=1)


def _plane(rng: np.random.Generator, n: int) -> np.ndarray:
    xy = rng.uniform(-1, 1, size=(n, 2))
    return np.concatenate([xy, np.zeros((n, 1))], axis=1)


def _pyramid(rng: np.random.Generator, n: int) -> np.ndarray:
    return sample_surface_points(PYRAMID, n, seed=int(rng.integers(2**31))).points


def _helix(rng: np.random.Generator, n: int) -> np.ndarray:
    # constant speed, so uniform in the parameter is uniform in arc length
    t = rng.random(n)
    angle = 2 * np.pi * HELIX_TURNS * t
    return np.stack([np.cos(angle), np.sin(angle), 2 * t - 1], axis=1)


GENERATORS: Dict[str, Callable[[np.random.Generator, int], np.ndarray]] = {
    "sphere": _sphere,
    "cube": _cube,
    "cylinder": _cylinder,
    "cone": _cone,
    "torus": _torus,
    "plane": _plane,
    "pyramid": _pyramid,
    "helix": _helix,
}


def generate_shape(
    kind: str, n: int = 256, noise: float = 0.0, seed: int = 0, normalize: bool = True, label=None
) -> PointCloud:
    """
    Sample n points from an analytic shape.

    Args:
        kind: One of SHAPE_KINDS
        n: Number of points (at least 8)
        noise: Standard deviation of the Gaussian jitter
        seed: Generator seed
        normalize: Center and scale to unit max-norm
        label: Class index stored on the cloud

    Returns:
        PointCloud with n points
    """
    if kind not in GENERATORS:
        raise ArgumentError(f"unknown shape kind '{kind}', expected one of {SHAPE_KINDS}")
    if n < 8:
        raise ArgumentError(f"shape needs at least 8 points, got {n}")
    if noise < 0:
        raise ArgumentError(f"noise must be non-negative, got {noise}")
    rng = np.random.default_rng(seed)
    points = GENERATORS[kind](rng, n)
    if noise > 0:
        points = points + rng.normal(0.0, noise, size=points.shape)
    return PointCloud(normalize_points(points) if normalize else points, label)
