"""
Orthographic depth rendering, the image modality of synthetic triplets.
"""

import numpy as np

from encoders.point import PointCloud

# keeps the farthest possible depth strictly above the empty-pixel value 0
DEPTH_MARGIN = 1e-3


def view_rotation(azimuth: float, elevation: float) -> np.ndarray:
    """Rotation about z by azimuth, then about x by elevation (degrees)."""
    az, el = np.radians(azimuth), np.radians(elevation)
    rz = np.array([[np.cos(az), -np.sin(az), 0.0], [np.sin(az), np.cos(az), 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, np.cos(el), -np.sin(el)], [0.0, np.sin(el), np.cos(el)]])
    return rx @ rz


def render_depth(
    pc: PointCloud, azimuth: float = 0.0, elevation: float = 0.0, height: int = 32, width: int = 32
) -> np.ndarray:
    """
    Depth image of a unit-ball cloud seen from +z after the view rotation.

    x maps to columns, y to rows (top row is y = +1). Each pixel keeps its
    nearest point; depth z in [-1, 1] is stored as (z + 1 + m) / (2 + m),
    so values lie in (0, 1] and empty pixels stay exactly 0.
    """
    points = np.clip(pc.points @ view_rotation(azimuth, elevation).T, -1.0, 1.0)
    cols = np.minimum(((points[:, 0] + 1.0) / 2.0 * width).astype(np.int64), width - 1)
    rows = np.minimum(((1.0 - points[:, 1]) / 2.0 * height).astype(np.int64), height - 1)

    nearest = np.full((height, width), -np.inf)
    np.maximum.at(nearest, (rows, cols), points[:, 2])
    image = np.zeros((height, width))
    hit = np.isfinite(nearest)
    image[hit] = (nearest[hit] + 1.0 + DEPTH_MARGIN) / (2.0 + DEPTH_MARGIN)
    return image
