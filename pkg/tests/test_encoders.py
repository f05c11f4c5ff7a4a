import numpy as np
import pytest

from autodiff import Tensor, grad_check_parameter
from config.settings import VOCABULARY_FILE
from encoders.image import ImageEncoder
from encoders.point import PointCloud, PointEncoder, fps, knn_group, normalize_points
from encoders.stack import EncoderStack, set_frozen
from encoders.text import END, PAD, START, UNK, TextEncoder, TokenSequence, Vocabulary, tokenize
from errors import ArgumentError, DimensionError

WORDS = ["a", "point", "cloud", "of", "chair", "model"]


@pytest.fixture
def text_encoder():
    vocab = Vocabulary.from_words(WORDS)
    return TextEncoder(vocab, width=8, heads=2, depth=1, length=8, rng=np.random.default_rng(0))


@pytest.fixture
def point_encoder():
    return PointEncoder(
        width=12, heads=2, depth=1, embed_dim=16, num_patches=4, patch_size=8, rng=np.random.default_rng(1), hidden=8
    )


@pytest.fixture
def image_encoder():
    return ImageEncoder(size=8, patch=4, width=8, heads=2, depth=2, embed_dim=16, rng=np.random.default_rng(2))


def random_cloud(n: int = 32, seed: int = 0) -> np.ndarray:
    return normalize_points(np.random.default_rng(seed).normal(size=(n, 3)))


# ----------------------------------------------------------------------
# vocabulary and tokenizer


def test_vocabulary_special_tokens_fixed():
    vocab = Vocabulary.from_words(WORDS)
    assert vocab.words[:4] == ["<start>", "<end>", "<pad>", "<unk>"]
    assert [vocab.lookup(w) for w in vocab.words] == list(range(len(vocab)))


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ArgumentError):
        Vocabulary.from_words(["chair", "chair"])


def test_vocabulary_file_line_numbers():
    vocab = Vocabulary.from_file(VOCABULARY_FILE)
    lines = VOCABULARY_FILE.read_text().splitlines()
    assert len(vocab) == len(lines) + 4
    assert vocab.lookup(lines[0]) == 4
    assert vocab.lookup("sphere") == lines.index("sphere") + 4


def test_tokenize_empty_text():
    assert tokenize("", Vocabulary.from_words(WORDS), 6) == [START, END, PAD, PAD, PAD, PAD]


def test_tokenize_case_folding_and_punctuation():
    vocab = Vocabulary.from_words(WORDS)
    assert tokenize("Chair", vocab, 6) == tokenize("chair", vocab, 6)
    assert tokenize("a chair.", vocab, 6) == tokenize("a chair", vocab, 6)


def test_tokenize_counts_in_vocabulary_content():
    vocab = Vocabulary.from_words(WORDS)
    ids = tokenize("a point cloud of a chair", vocab, 10)
    content = ids[1 : ids.index(END)]
    assert len(content) == 6
    assert UNK not in content


def test_tokenize_unknown_and_truncation():
    vocab = Vocabulary.from_words(WORDS)
    assert tokenize("zebra", vocab, 4) == [START, UNK, END, PAD]
    assert tokenize("a point cloud of a chair", vocab, 4) == [START, vocab.lookup("a"), vocab.lookup("point"), END]


# ----------------------------------------------------------------------
# text encoder


def test_text_encode_ignores_padding(text_encoder):
    seq = text_encoder.embed_text("a chair")
    noisy = seq.embeddings.data.copy()
    noisy[seq.end_index + 1 :] = np.random.default_rng(3).normal(size=noisy[seq.end_index + 1 :].shape)
    other = TokenSequence(Tensor(noisy), seq.content_mask, seq.end_index)
    np.testing.assert_array_equal(text_encoder.text_encode(seq).data, text_encoder.text_encode(other).data)


def test_text_encode_is_deterministic(text_encoder):
    seq = text_encoder.embed_text("a point cloud of a chair")
    out = text_encoder.text_encode(seq)
    assert out.shape == (8,)
    np.testing.assert_array_equal(out.data, text_encoder.text_encode(seq).data)


def test_text_encode_sees_token_order(text_encoder):
    a = text_encoder.text_encode(text_encoder.embed_text("a point cloud")).data
    b = text_encoder.text_encode(text_encoder.embed_text("point a cloud")).data
    assert np.max(np.abs(a - b)) > 1e-6


def test_text_encode_length_mismatch(text_encoder):
    with pytest.raises(DimensionError):
        text_encoder.embed([START, END])
    short = TokenSequence(Tensor(np.zeros((3, 8))), np.zeros(3, dtype=bool), 1)
    with pytest.raises(DimensionError):
        text_encoder.text_encode(short)


def test_text_encoder_gradients(text_encoder):
    weights = Tensor(np.random.default_rng(4).normal(size=(2, 8)))

    def loss():
        return (text_encoder.encode_texts(["a point cloud", "a chair"]) * weights).sum()

    assert grad_check_parameter(loss, text_encoder.block0.mlp.fc1.weight) <= 1e-4
    assert grad_check_parameter(loss, text_encoder.position_embedding) <= 1e-4


# ----------------------------------------------------------------------
# point patchification


def test_fps_exhaustive_and_single():
    points = random_cloud(10)
    chosen = fps(points, 10)
    assert sorted(chosen.tolist()) == list(range(10))
    np.testing.assert_array_equal(chosen, fps(points, 10))
    assert fps(points, 1).tolist() == [0]


def test_fps_square_corners_picks_diagonal():
    square = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    assert fps(square, 2).tolist() == [0, 2]


def test_fps_too_many_centers():
    with pytest.raises(ArgumentError):
        fps(random_cloud(5), 6)


def test_knn_single_neighbor_is_center():
    points = random_cloud(12)
    patches = knn_group(points, np.array([0, 5, 7]), 1)
    np.testing.assert_array_equal(patches, np.zeros((3, 1, 3)))


def test_knn_coincident_points():
    points = np.ones((6, 3))
    np.testing.assert_array_equal(knn_group(points, np.array([0, 3]), 4), np.zeros((2, 4, 3)))


def test_knn_collinear_ties_go_to_lowest_index():
    points = np.array([[float(x), 0.0, 0.0] for x in range(5)])
    patch = knn_group(points, np.array([2]), 3)[0]
    np.testing.assert_array_equal(patch[:, 0], [0.0, -1.0, 1.0])


def test_knn_too_many_neighbors():
    with pytest.raises(ArgumentError):
        knn_group(random_cloud(4), np.array([0]), 5)


# ----------------------------------------------------------------------
# point and image encoders


def test_point_cloud_normalization_invariants():
    cloud = PointCloud.normalized(np.random.default_rng(5).uniform(-3, 7, size=(50, 3)))
    np.testing.assert_allclose(cloud.points.mean(axis=0), 0.0, atol=1e-9)
    assert np.linalg.norm(cloud.points, axis=1).max() == pytest.approx(1.0, abs=1e-9)


def test_point_cloud_shape_check():
    with pytest.raises(DimensionError):
        PointCloud(np.zeros((4, 2)))


def test_point_encode_shape_and_determinism(point_encoder):
    cloud = PointCloud(random_cloud())
    out = point_encoder.point_encode(cloud)
    assert out.shape == (16,)
    np.testing.assert_array_equal(out.data, point_encoder.point_encode(cloud).data)


def test_point_encode_permutation_invariant(point_encoder):
    points = random_cloud(seed=6)
    shuffled = points[np.random.default_rng(7).permutation(len(points))]
    np.testing.assert_array_equal(
        point_encoder.point_encode(PointCloud(points)).data, point_encoder.point_encode(PointCloud(shuffled)).data
    )


def test_point_encode_any_valid_size(point_encoder):
    for n in (8, 20, 64):
        assert point_encoder.point_encode(PointCloud(random_cloud(n))).shape == (16,)


def test_point_encode_too_few_points(point_encoder):
    with pytest.raises(ArgumentError):
        point_encoder.point_encode(PointCloud(random_cloud(6)))


def test_point_encoder_gradients(point_encoder):
    clouds = [random_cloud(seed=8), random_cloud(seed=9)]
    weights = Tensor(np.random.default_rng(10).normal(size=(2, 16)))

    def loss():
        return (point_encoder.project(point_encoder.features(clouds)) * weights).sum()

    assert grad_check_parameter(loss, point_encoder.block0.attn.qkv.weight) <= 1e-4
    assert grad_check_parameter(loss, point_encoder.cls_token) <= 1e-4


def test_image_encode_zero_image(image_encoder):
    out = image_encoder.image_encode(np.zeros((8, 8)))
    assert out.shape == (16,)
    assert np.all(np.isfinite(out.data))


def test_image_encode_deterministic_and_sensitive(image_encoder):
    image = np.random.default_rng(11).random((8, 8))
    out = image_encoder.image_encode(image).data
    np.testing.assert_array_equal(out, image_encoder.image_encode(image).data)
    changed = image.copy()
    changed[3, 5] += 0.5
    assert np.max(np.abs(out - image_encoder.image_encode(changed).data)) > 1e-9


def test_image_encode_shape_mismatch(image_encoder):
    with pytest.raises(DimensionError):
        image_encoder.image_encode(np.zeros((8, 6)))


def test_image_encoder_gradients(image_encoder):
    images = np.random.default_rng(12).random((2, 8, 8))
    weights = Tensor(np.random.default_rng(13).normal(size=(2, 16)))

    def loss():
        return (image_encoder.encode(images) * weights).sum()

    assert grad_check_parameter(loss, image_encoder.patch_embed.weight) <= 1e-4


# ----------------------------------------------------------------------
# stack and freezing


def test_stack_shared_dimension(make_config):
    cfg = make_config()
    stack = EncoderStack(cfg)
    text = stack.text_encoder.encode_texts(["a cube"])
    image = stack.image_encoder.encode(np.zeros((1, cfg.image_size, cfg.image_size)))
    point = stack.point_encoder.project(stack.point_encoder.features([random_cloud()]))
    assert text.shape == image.shape == point.shape == (1, cfg.embed_dim)


def test_set_frozen_flips_every_parameter(make_config):
    stack = EncoderStack(make_config())
    set_frozen(stack.point_encoder, True)
    assert not any(p.trainable for p in stack.point_encoder.parameters())
    assert stack.point_encoder.trainable_parameters() == []
    set_frozen(stack.point_encoder, False)
    assert all(p.trainable for p in stack.point_encoder.parameters())


def test_set_frozen_keeps_forward_math(make_config):
    stack = EncoderStack(make_config())
    before = stack.text_encoder.encode_texts(["a cube"]).data
    set_frozen(stack.text_encoder, True)
    np.testing.assert_array_equal(before, stack.text_encoder.encode_texts(["a cube"]).data)
