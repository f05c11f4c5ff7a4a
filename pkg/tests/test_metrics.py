import numpy as np
import pytest

from autodiff import normalize
from config.templates import template_ids
from data.dataset import synthetic_dataset
from errors import ArgumentError, DataError
from evaluators.metrics import (
    accuracy_metrics,
    evaluate,
    manual_prompt_features,
    template_ensemble_evaluate,
    template_fluctuation,
    zero_shot_evaluate,
)
from orchestrator.model import PptModel


@pytest.fixture
def test_set(make_config):
    return synthetic_dataset(make_config().class_names, per_class=3, split="test", n_points=32, seed=2)


def test_oracle_predictions():
    labels = np.array([0, 1, 2, 2, 1, 0])
    metrics = accuracy_metrics(labels, labels, 3)
    assert metrics["overall_accuracy"] == 1.0
    assert metrics["mean_class_accuracy"] == 1.0
    assert metrics["per_class_accuracy"] == [1.0, 1.0, 1.0]
    assert metrics["confusion"] == [[2, 0, 0], [0, 2, 0], [0, 0, 2]]
    assert metrics["count"] == 6


def test_confusion_rows_are_true_classes():
    metrics = accuracy_metrics([1, 1, 0, 2], [0, 1, 1, 2], 3)
    assert metrics["confusion"] == [[0, 1, 0], [1, 1, 0], [0, 0, 1]]
    assert sum(map(sum, metrics["confusion"])) == 4
    assert metrics["overall_accuracy"] == 0.5
    assert metrics["per_class_accuracy"] == [0.0, 0.5, 1.0]
    assert metrics["mean_class_accuracy"] == pytest.approx(0.5)


def test_random_predictions_near_chance():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 8, size=4000)
    predictions = rng.integers(0, 8, size=4000)
    assert accuracy_metrics(predictions, labels, 8)["overall_accuracy"] == pytest.approx(1 / 8, abs=0.05)


def test_empty_class_is_skipped_in_mean():
    metrics = accuracy_metrics([0, 0, 2], [0, 0, 2], 3)
    assert metrics["per_class_accuracy"] == [1.0, None, 1.0]
    assert metrics["mean_class_accuracy"] == 1.0


def test_accuracy_argument_errors():
    with pytest.raises(ArgumentError):
        accuracy_metrics([], [], 3)
    with pytest.raises(ArgumentError):
        accuracy_metrics([0, 1], [0], 3)
    with pytest.raises(DataError):
        accuracy_metrics([0], [3], 3)


def test_evaluate_checks_class_names(make_config, test_set):
    model = PptModel(make_config(class_names=["sphere", "cube", "cone"]))
    with pytest.raises(DataError):
        evaluate(model, test_set)


def test_evaluate_counts_every_sample(make_config, test_set):
    metrics = evaluate(PptModel(make_config()), test_set)
    assert metrics["count"] == 9
    assert 0.0 <= metrics["overall_accuracy"] <= 1.0
    assert np.array(metrics["confusion"]).sum(axis=1).tolist() == [3, 3, 3]


def test_single_template_features_are_normalized_captions(make_config):
    model = PptModel(make_config())
    feats = manual_prompt_features(model, ["cube", "torus"], ["photo_of_a"])
    expected = normalize(model.text_encoder.encode_texts(["a photo of a cube", "a photo of a torus"]))
    np.testing.assert_allclose(feats.data, expected.data, atol=1e-12)


def test_zero_shot_and_ensemble(make_config, test_set):
    model = PptModel(make_config())
    zero = zero_shot_evaluate(model, test_set)
    ensemble = template_ensemble_evaluate(model, test_set)
    assert zero["count"] == ensemble["count"] == 9
    with pytest.raises(ArgumentError):
        zero_shot_evaluate(model, test_set, "a sketch of a")


def test_zero_shot_ignores_the_adapter(make_config, test_set):
    plain = zero_shot_evaluate(PptModel(make_config(adapter="none")), test_set)
    adapted = zero_shot_evaluate(PptModel(make_config(adapter="ffn")), test_set)
    assert plain == adapted


def test_template_fluctuation_lists_every_template(make_config, test_set):
    rows = template_fluctuation(PptModel(make_config()), test_set)
    assert [row["template"] for row in rows] == template_ids()
    assert len(rows) == 8
    assert all("[CLASS]" in row["text"] for row in rows)
    assert all(0.0 <= row["overall_accuracy"] <= 1.0 for row in rows)


def test_predictions_do_not_depend_on_temperature(make_config, test_set):
    sharp = PptModel(make_config(tau_cls=0.01))
    smooth = PptModel(make_config(tau_cls=5.0))
    np.testing.assert_array_equal(sharp.predict(test_set.clouds()), smooth.predict(test_set.clouds()))
