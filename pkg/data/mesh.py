"""
OFF mesh parsing, area-weighted surface sampling and the XYZ point loader.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, NamedTuple, Tuple, Union

import numpy as np

from encoders.point import PointCloud
from errors import DataError, ParseError

logger = logging.getLogger(__name__)


@dataclass
class Mesh:
    """Vertices [V, 3] and triangle faces [F, 3]."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise DataError(f"face index out of range for {len(self.vertices)} vertices")

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def fan_triangulate(polygon: List[int]) -> List[Tuple[int, int, int]]:
    """[v0, v1, ..., vn] -> [v0, v1, v2], [v0, v2, v3], ..."""
    return [(polygon[0], polygon[i], polygon[i + 1]) for i in range(1, len(polygon) - 1)]


def _content_lines(text: str) -> Iterator[Tuple[int, List[str]]]:
    for number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split("#", 1)[0].split()
        if tokens:
            yield number, tokens


def parse_off(data: Union[bytes, str]) -> Mesh:
    """
    Parse an OFF file.

    The "OFF" header line is optional and may be fused with the counts
    ("OFF490 518 0"). Comments and blank lines are skipped; polygons are
    fan-triangulated.

    Raises:
        ParseError: Malformed counts or coordinates, out-of-range indices or
            a truncated file, with the offending line number
    """
    text = data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data
    lines = _content_lines(text)
    last_line = len(text.splitlines())

    def next_line(what: str) -> Tuple[int, List[str]]:
        try:
            return next(lines)
        except StopIteration:
            raise ParseError(f"unexpected end of file while reading {what}", last_line + 1) from None

    number, tokens = next_line("header")
    if tokens[0].upper().startswith("OFF"):
        rest = tokens[0][3:]
        tokens = ([rest] if rest else []) + tokens[1:]
        if not tokens:
            number, tokens = next_line("counts")

    try:
        counts = [int(t) for t in tokens[:3]]
    except ValueError:
        raise ParseError(f"malformed counts {tokens!r}", number) from None
    if len(counts) < 2 or min(counts) < 0:
        raise ParseError(f"expected 'V F [E]' counts, got {tokens!r}", number)
    num_vertices, num_faces = counts[0], counts[1]

    # grown line by line; the declared count is untrusted until the lines exist
    vertices: List[List[float]] = []
    for i in range(num_vertices):
        number, tokens = next_line(f"vertex {i}")
        if len(tokens) < 3:
            raise ParseError(f"vertex needs 3 coordinates, got {len(tokens)}", number)
        try:
            vertices.append([float(t) for t in tokens[:3]])
        except ValueError:
            raise ParseError(f"malformed vertex {tokens!r}", number) from None

    triangles: List[Tuple[int, int, int]] = []
    for i in range(num_faces):
        number, tokens = next_line(f"face {i}")
        try:
            size = int(tokens[0])
            polygon = [int(t) for t in tokens[1 : size + 1]]
        except ValueError:
            raise ParseError(f"malformed face {tokens!r}", number) from None
        if size < 3 or len(polygon) != size:
            raise ParseError(f"face needs at least 3 indices and exactly {size} listed", number)
        bad = [v for v in polygon if not 0 <= v < num_vertices]
        if bad:
            raise ParseError(f"face index {bad[0]} out of range for {num_vertices} vertices", number)
        triangles.extend(fan_triangulate(polygon))

    return Mesh(vertices, np.array(triangles, dtype=np.int64).reshape(-1, 3))


def load_off(path: Union[str, Path]) -> Mesh:
    with open(path, "rb") as f:
        return parse_off(f.read())


class SurfaceSample(NamedTuple):
    points: np.ndarray
    faces: np.ndarray
    barycentric: np.ndarray


def sample_surface_points(mesh: Mesh, n: int, seed: int = 0) -> SurfaceSample:
    """
    Area-weighted triangle choice, then uniform barycentric coordinates
    (reflected back into the triangle when u + v > 1).
    """
    areas = mesh.triangle_areas()
    total = areas.sum()
    if len(areas) == 0 or total <= 0:
        raise DataError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    faces = rng.choice(len(areas), size=n, p=areas / total)
    u, v = rng.random(n), rng.random(n)
    outside = u + v > 1
    u[outside], v[outside] = 1 - u[outside], 1 - v[outside]
    bary = np.stack([1 - u - v, u, v], axis=1)
    corners = mesh.vertices[mesh.faces[faces]]
    points = (bary[:, :, None] * corners).sum(axis=1)
    return SurfaceSample(points, faces, bary)


def sample_surface(mesh: Mesh, n: int, seed: int = 0, label=None) -> PointCloud:
    """n surface points, centered and scaled to unit max-norm."""
    return PointCloud.normalized(sample_surface_points(mesh, n, seed).points, label)


def parse_xyz(text: str) -> np.ndarray:
    rows = []
    for number, tokens in _content_lines(text):
        if len(tokens) < 3:
            raise ParseError(f"expected 'x y z', got {tokens!r}", number)
        try:
            rows.append([float(t) for t in tokens[:3]])
        except ValueError:
            raise ParseError(f"malformed coordinates {tokens!r}", number) from None
    if not rows:
        raise DataError("xyz file holds no points")
    return np.array(rows)


def load_xyz(path: Union[str, Path], label=None) -> PointCloud:
    """One whitespace-separated 'x y z' point per line, normalized on load."""
    with open(path, "r") as f:
        return PointCloud.normalized(parse_xyz(f.read()), label)
