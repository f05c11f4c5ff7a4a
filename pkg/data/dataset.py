"""
Datasets, subsetting and pre-training triplets.

Samples are either generated (synthetic shape suite) or loaded from files;
either way a manifest record is enough to rebuild them.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.templates import CAPTION_TEMPLATE_IDS, SHAPE_KINDS
from data.captions import make_caption
from data.mesh import load_off, load_xyz, sample_surface
from data.render import render_depth
from data.shapes import generate_shape
from encoders.point import PointCloud
from errors import ArgumentError, DataError

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


def derive_seed(*parts: int) -> int:
    """Stable integer seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class Sample:
    id: str
    cloud: PointCloud
    label: int
    source: Optional[str] = None
    generator: Optional[Dict[str, Any]] = None


@dataclass
class Dataset:
    samples: List[Sample]
    class_names: List[str]
    split: str = "train"

    def __post_init__(self):
        if not self.class_names:
            raise DataError("dataset needs at least one class")
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError(f"class names must be unique: {self.class_names}")
        bad = [s.id for s in self.samples if not 0 <= s.label < len(self.class_names)]
        if bad:
            raise DataError(f"sample '{bad[0]}' has a label outside 0..{len(self.class_names) - 1}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def ids(self) -> List[str]:
        return [s.id for s in self.samples]

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def clouds(self) -> List[np.ndarray]:
        return [s.cloud.points for s in self.samples]

    def by_class(self) -> List[List[int]]:
        """Sample positions grouped by label, in dataset order."""
        groups: List[List[int]] = [[] for _ in self.class_names]
        for i, sample in enumerate(self.samples):
            groups[sample.label].append(i)
        return groups

    def subset(self, positions: Sequence[int]) -> "Dataset":
        return Dataset([self.samples[i] for i in sorted(positions)], list(self.class_names), self.split)


@dataclass(frozen=True)
class FewShotSpec:
    shots: int
    seed: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ArgumentError(f"few-shot needs shots >= 1, got {self.shots}")


def few_shot_subset(ds: Dataset, spec: FewShotSpec) -> Dataset:
    """Exactly k samples per class, drawn without replacement."""
    rng = np.random.default_rng(spec.seed)
    keep: List[int] = []
    for name, positions in zip(ds.class_names, ds.by_class()):
        if len(positions) < spec.shots:
            raise DataError(f"class '{name}' has {len(positions)} samples, fewer than {spec.shots} shots")
        keep.extend(rng.choice(positions, size=spec.shots, replace=False).tolist())
    return ds.subset(keep)


def fraction_subset(ds: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """
    Per-class stratified subset of ceil(fraction * class size) samples.

    Each class is shuffled once per seed and its prefix is kept, so smaller
    fractions are subsets of larger ones.
    """
    if not 0 < fraction <= 1:
        raise ArgumentError(f"fraction must lie in (0, 1], got {fraction}")
    keep: List[int] = []
    for j, (name, positions) in enumerate(zip(ds.class_names, ds.by_class())):
        count = math.ceil(round(fraction * len(positions), 9))
        if count == 0:
            raise DataError(f"class '{name}' is empty after taking fraction {fraction}")
        order = np.random.default_rng(derive_seed(seed, j)).permutation(len(positions))
        keep.extend(positions[i] for i in order[:count])
    return ds.subset(keep)


# ----------------------------------------------------------------------
# synthetic shape suite


def synthetic_dataset(
    class_names: Sequence[str],
    per_class: int,
    split: str = "train",
    n_points: int = 256,
    noise: float = 0.01,
    seed: int = 0,
) -> Dataset:
    """Shape-suite dataset; every class name must be a known shape kind."""
    unknown = [name for name in class_names if name not in SHAPE_KINDS]
    if unknown:
        raise DataError(f"synthetic data has no generator for {unknown}, known: {SHAPE_KINDS}")
    samples = []
    for label, kind in enumerate(class_names):
        for i in range(per_class):
            spec = {
                "kind": kind,
                "n": n_points,
                "noise": noise,
                "seed": derive_seed(seed, SPLITS.index(split), SHAPE_KINDS.index(kind), i),
            }
            cloud = generate_shape(spec["kind"], spec["n"], spec["noise"], spec["seed"], label=label)
            samples.append(Sample(f"{split}/{kind}/{i:04d}", cloud, label, generator=spec))
    return Dataset(samples, list(class_names), split)


@dataclass
class Triplet:
    """Aligned point cloud, depth image and caption of one object."""

    points: np.ndarray
    image: np.ndarray
    caption: str
    label: int


def build_triplets(ds: Dataset, image_size: int = 32, seed: int = 0) -> List[Triplet]:
    """One triplet per sample: a random-view depth render and a random caption template."""
    rng = np.random.default_rng(seed)
    triplets = []
    for sample in ds:
        azimuth, elevation = rng.uniform(0, 360), rng.uniform(-30, 30)
        template = CAPTION_TEMPLATE_IDS[int(rng.integers(len(CAPTION_TEMPLATE_IDS)))]
        triplets.append(
            Triplet(
                points=sample.cloud.points,
                image=render_depth(sample.cloud, azimuth, elevation, image_size, image_size),
                caption=make_caption(ds.class_names[sample.label], template),
                label=sample.label,
            )
        )
    return triplets


# ----------------------------------------------------------------------
# files


POINT_FILE_SUFFIXES = (".off", ".xyz")


def _load_cloud(path: Path, n_points: int, seed: int, label: int) -> PointCloud:
    if path.suffix.lower() == ".xyz":
        return load_xyz(path, label)
    return sample_surface(load_off(path), n_points, seed, label)


def load_off_directory(
    root: str,
    split: str = "train",
    n_points: int = 256,
    seed: int = 0,
    class_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """
    Read `<root>/<class_name>/<split>/*.off` and `*.xyz`. OFF meshes are
    surface-sampled to `n_points`; XYZ clouds keep their own points.

    Classes default to the sorted subdirectory names of `root`.
    """
    base = Path(root)
    if not base.is_dir():
        raise DataError(f"data root '{root}' is not a directory")
    names = list(class_names) if class_names else sorted(p.name for p in base.iterdir() if p.is_dir())
    samples = []
    for label, name in enumerate(names):
        folder = base / name / split
        files = []
        if folder.is_dir():
            files = sorted(p for p in folder.iterdir() if p.suffix.lower() in POINT_FILE_SUFFIXES)
        if not files:
            raise DataError(f"no OFF or XYZ files under {folder}")
        for i, path in enumerate(files):
            cloud = _load_cloud(path, n_points, derive_seed(seed, label, i), label)
            samples.append(Sample(f"{split}/{name}/{path.stem}", cloud, label, source=str(path)))
    logger.info("Loaded %d %s samples over %d classes from %s", len(samples), split, len(names), root)
    return Dataset(samples, names, split)


def write_manifest(ds: Dataset, path: str) -> None:
    """One JSON record per sample: id, path or generator, class, split."""
    with open(path, "w") as f:
        for sample in ds:
            record = {
                "id": sample.id,
                "class": ds.class_names[sample.label],
                "split": ds.split,
            }
            if sample.source is not None:
                record["path"] = sample.source
            else:
                record["generator"] = sample.generator
            f.write(json.dumps(record, sort_keys=True) + "\n")


def read_manifest(path: str, class_names: Sequence[str], n_points: int = 256, seed: int = 0) -> Dict[str, Dataset]:
    """
    Rebuild datasets from a manifest, keyed by split.

    Raises:
        DataError: Unknown class, or a record with neither path nor generator
    """
    grouped: Dict[str, List[Sample]] = {}
    with open(path, "r") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if record["class"] not in class_names:
                raise DataError(f"{path}:{number}: unknown class '{record['class']}'")
            label = list(class_names).index(record["class"])
            if "path" in record:
                cloud = _load_cloud(Path(record["path"]), n_points, derive_seed(seed, number), label)
                sample = Sample(record["id"], cloud, label, source=record["path"])
            elif "generator" in record:
                spec = record["generator"]
                cloud = generate_shape(spec["kind"], spec["n"], spec["noise"], spec["seed"], label=label)
                sample = Sample(record["id"], cloud, label, generator=spec)
            else:
                raise DataError(f"{path}:{number}: record has neither 'path' nor 'generator'")
            grouped.setdefault(record["split"], []).append(sample)
    return {split: Dataset(samples, list(class_names), split) for split, samples in grouped.items()}


def load_datasets(cfg) -> Tuple[Dataset, Dataset]:
    """
    Train and test splits for a RunConfig, with few-shot or fraction
    subsetting applied to the train split only.
    """
    names = cfg.resolved_class_names()
    if cfg.dataset == "off":
        train = load_off_directory(cfg.data_root, "train", cfg.num_points, cfg.data_seed, cfg.class_names)
        test = load_off_directory(cfg.data_root, "test", cfg.num_points, cfg.data_seed, cfg.class_names)
    else:
        train = synthetic_dataset(names, cfg.train_per_class, "train", cfg.num_points, cfg.point_noise, cfg.data_seed)
        test = synthetic_dataset(names, cfg.test_per_class, "test", cfg.num_points, cfg.point_noise, cfg.data_seed)
    if cfg.shots is not None:
        train = few_shot_subset(train, FewShotSpec(cfg.shots, cfg.data_seed))
    elif cfg.fraction < 1.0:
        train = fraction_subset(train, cfg.fraction, cfg.data_seed)
    return train, test
