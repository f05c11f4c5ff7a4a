"""
Shared fixtures: tiny configurations that keep every forward pass cheap.
"""

import numpy as np
import pytest
import yaml

from autodiff import Parameter
from config.settings import RunConfig
from encoders.text import Vocabulary

TINY = {
    "mode": "tune",
    "context_length": 4,
    "adapter": "none",
    "loss_form": "categorical",
    "embed_dim": 16,
    "text_heads": 2,
    "text_depth": 1,
    "text_length": 12,
    "point_width": 12,
    "point_heads": 2,
    "point_depth": 1,
    "num_patches": 4,
    "patch_size": 8,
    "patch_hidden": 8,
    "num_points": 32,
    "image_size": 8,
    "image_patch": 4,
    "image_width": 8,
    "image_heads": 2,
    "image_depth": 1,
    "adapter_heads": 2,
    "mlp_ratio": 2,
    "batch_size": 8,
    "steps": 3,
    "train_per_class": 4,
    "test_per_class": 2,
    "class_names": ["sphere", "cube", "torus"],
    "seed": 5,
    "data_seed": 3,
    "progress": False,
}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow reference runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def make_config():
    """Factory for validated tiny RunConfigs with keys overridden."""

    def _make(**overrides) -> RunConfig:
        data = dict(TINY)
        data.update(overrides)
        return RunConfig.model_validate(data)

    return _make


@pytest.fixture
def write_config(tmp_path):
    """Write a tiny config as YAML and return its path."""

    def _write(name: str = "run.yaml", **overrides) -> str:
        data = dict(TINY)
        data.update(overrides)
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data))
        return str(path)

    return _write


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "runs")


def make_vocab(words, dim: int = 8, seed: int = 0) -> Vocabulary:
    """Vocabulary over `words` with a seeded Gaussian embedding table."""
    base = Vocabulary.from_words(words)
    table = np.random.default_rng(seed).normal(size=(len(base), dim))
    return Vocabulary(base.words, embedding=Parameter(table, trainable=False))
