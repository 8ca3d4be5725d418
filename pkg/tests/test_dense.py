import numpy as np
import pytest

from pbpvision.errors import ConfigError, DimensionMismatchError
from pbpvision.imaging.image import Image
from pbpvision.inference.mcmc import RngStream
from pbpvision.stereo.dense import (
    dense_stereo,
    matching_cost_volume,
    mutual_consistency,
    right_disparity,
    sample_columns,
)
from pbpvision.synthetic.stereo_scenes import render_plane_scene

SHIFT = 4


@pytest.fixture(scope="module")
def shifted_scene():
    return render_plane_scene(
        24, 40, surfaces=[[0.0, 0.0, float(SHIFT)]], surface_labels=np.zeros((24, 40), dtype=int), rng=RngStream(5)
    )


def test_sample_columns_interpolates_between_pixels():
    features = np.arange(4.0)[None, :, None] * np.ones((2, 1, 2))
    values, inside = sample_columns(features, np.array([1.5, -0.5, 3.0]), np.array([1, 0, 0]))
    np.testing.assert_allclose(values[:, 0], [1.5, 0.0, 3.0])
    assert inside.tolist() == [True, False, True]


def test_cost_volume_is_zero_at_the_true_shift():
    rng = np.random.default_rng(0)
    right = rng.normal(size=(3, 12, 9))
    left = np.zeros_like(right)
    left[:, 2:] = right[:, :-2]
    volume = matching_cost_volume(left, right, 5, truncation=100.0)
    assert volume.shape == (3, 12, 6)
    np.testing.assert_allclose(volume[:, 2:, 2], 0.0)
    np.testing.assert_allclose(volume[:, :3, 3], 100.0)
    assert np.all(volume <= 100.0)
    with pytest.raises(DimensionMismatchError):
        matching_cost_volume(left, right[:, :-1], 5)


def test_dense_stereo_finds_a_constant_shift(shifted_scene):
    result = dense_stereo(shifted_scene.left, shifted_scene.right, 8)
    interior = result.values[:, SHIFT + 2 : -2]
    assert np.mean(interior == SHIFT) > 0.9
    np.testing.assert_array_equal(result.valid, np.arange(40)[None, :] - result.values >= 0)


def test_right_disparity_mirrors_the_left_one(shifted_scene):
    result = right_disparity(shifted_scene.left, shifted_scene.right, 8)
    assert np.mean(result.values[:, 2 : -SHIFT - 2] == SHIFT) > 0.9
    np.testing.assert_array_equal(result.valid, np.arange(40)[None, :] + result.values <= 39)


def test_mutual_consistency_marks_disagreement():
    d_left = np.ones((1, 4))
    d_right = np.ones((1, 4))
    np.testing.assert_array_equal(mutual_consistency(d_left, d_right), [[True, False, False, False]])
    d_right[0, 1] = 3.0
    np.testing.assert_array_equal(mutual_consistency(d_left, d_right), [[True, False, True, False]])
    with pytest.raises(DimensionMismatchError):
        mutual_consistency(d_left, np.ones((2, 4)))


def test_pair_checks():
    with pytest.raises(DimensionMismatchError):
        dense_stereo(Image(np.zeros((4, 5))), Image(np.zeros((4, 6))), 2)
    with pytest.raises(ConfigError):
        dense_stereo(Image(np.zeros((4, 5))), Image(np.zeros((4, 5))), -1)
