import numpy as np
import pytest

from pbpvision.errors import (
    DataError,
    DegenerateChannelError,
    DimensionMismatchError,
    HeightBinningError,
    MalformedImageError,
)
from pbpvision.imaging.features import height_levels, monocular_features, pixel_features
from pbpvision.imaging.hog import (
    HOG_DIMENSION,
    cell_histograms,
    global_histogram,
    hog_pyramid,
    orientation_ratio,
    tilt_from_ratio,
)
from pbpvision.imaging.image import (
    Image,
    bias_gain_normalize,
    load_image,
    load_label_map,
    load_pfm,
    save_image,
    save_label_map,
    save_pfm,
)


def test_netpbm_files_keep_their_intensities(tmp_path):
    rgb = Image(np.random.default_rng(0).integers(0, 256, size=(4, 5, 3)) / 255.0)
    save_image(rgb, tmp_path / "a.ppm")
    loaded = load_image(tmp_path / "a.ppm")
    assert loaded.channels == 3
    np.testing.assert_allclose(loaded.data, rgb.data)
    gray = Image(np.linspace(0, 1, 12).reshape(3, 4))
    save_image(gray, tmp_path / "b.pgm")
    assert np.max(np.abs(load_image(tmp_path / "b.pgm").data - gray.data)) <= 0.5 / 255 + 1e-12


def test_header_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n# max\n255\n" + bytes([0, 255]))
    np.testing.assert_allclose(load_image(path).data[:, :, 0], [[0.0, 1.0]])


def test_sixteen_bit_label_maps(tmp_path):
    labels = np.array([[0, 300], [65535, 7]])
    save_label_map(labels, tmp_path / "l.pgm")
    np.testing.assert_array_equal(load_label_map(tmp_path / "l.pgm"), labels)
    with pytest.raises(DataError):
        save_label_map(np.array([[-1]]), tmp_path / "bad.pgm")


def test_pfm_keeps_row_order(tmp_path):
    array = np.arange(6, dtype=float).reshape(2, 3) + 0.25
    save_pfm(array, tmp_path / "d.pfm")
    np.testing.assert_array_equal(load_pfm(tmp_path / "d.pfm"), array)
    assert (tmp_path / "d.pfm").read_bytes().startswith(b"Pf\n3 2\n-1.0\n")


def test_broken_files_are_rejected(tmp_path):
    with pytest.raises(DataError):
        load_image(tmp_path / "missing.ppm")
    (tmp_path / "garbage.ppm").write_bytes(b"not an image at all")
    with pytest.raises(MalformedImageError):
        load_image(tmp_path / "garbage.ppm")
    (tmp_path / "header.pgm").write_bytes(b"P5\n4")
    with pytest.raises(MalformedImageError):
        load_image(tmp_path / "header.pgm")
    save_image(Image(np.zeros((2, 2, 3))), tmp_path / "color.ppm")
    with pytest.raises(MalformedImageError):
        load_label_map(tmp_path / "color.ppm")
    with pytest.raises(DataError):
        save_image(Image(np.zeros((2, 2))), tmp_path / "no_writer.unknown")


def test_sixteen_bit_images(tmp_path):
    gray = Image(np.array([[0.0, 0.5], [1.0, 0.25]]))
    save_image(gray, tmp_path / "deep.pgm", maxval=65535)
    loaded = load_image(tmp_path / "deep.pgm")
    assert np.max(np.abs(loaded.data - gray.data)) <= 0.5 / 65535 + 1e-12


def test_image_shapes():
    assert Image(np.zeros((2, 3))).channels == 1
    with pytest.raises(DimensionMismatchError):
        Image(np.zeros((2, 3, 2)))
    assert Image(np.zeros((2, 3))).as_rgb().channels == 3


def test_bias_gain_normalization():
    image = Image(np.random.default_rng(1).random((6, 7, 3)) * 0.3 + 0.2)
    normalized = bias_gain_normalize(image)
    np.testing.assert_allclose(normalized.mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(normalized.std, 1.0)
    flat = Image(np.full((3, 3), 0.5))
    with pytest.raises(DegenerateChannelError):
        bias_gain_normalize(flat)
    np.testing.assert_allclose(bias_gain_normalize(flat, strict=False).data, 0.0)


def test_pixel_features_of_a_ramp():
    ramp = Image(np.tile(np.arange(5.0), (4, 1)))
    features = pixel_features(ramp)
    assert features.shape == (4, 5, 9)
    np.testing.assert_allclose(features[:, 1:-1, 3:6], 1.0)
    np.testing.assert_allclose(features[:, :, 6:9], 0.0)
    np.testing.assert_allclose(features[:, :, 0], features[:, :, 2])


def test_monocular_feature_dimensions():
    rng = np.random.default_rng(2)
    gray = monocular_features(Image(rng.random((40, 24))))
    color = monocular_features(Image(rng.random((40, 24, 3))))
    assert gray.dimension == 48
    assert color.dimension == 54
    np.testing.assert_allclose(color.features[:, :, -1], 1.0)
    assert gray.height_level.min() == 0 and gray.height_level.max() == 39
    assert np.all(np.diff(gray.height_level[:, 0]) >= 0)
    assert np.all(np.isfinite(monocular_features(Image(np.full((40, 8), 0.3))).features))


def test_height_levels_need_enough_rows():
    with pytest.raises(HeightBinningError):
        height_levels(39, 10)
    levels = height_levels(80, 2)
    assert np.bincount(levels[:, 0]).tolist() == [2] * 40


def stripes(shape=(64, 64), period=6.0):
    xs = np.indices(shape)[1]
    return 0.5 + 0.4 * np.sin(2 * np.pi * xs / period)


def test_vertical_stripes_fill_the_vertical_edge_bin():
    histogram = global_histogram(stripes(), smoothing=0.0)
    assert histogram.sum() == pytest.approx(1.0)
    assert histogram[4] == pytest.approx(1.0)
    assert orientation_ratio(histogram) == 0.0


def test_hog_pyramid_cells():
    pyramid = hog_pyramid(Image(stripes((40, 50))))
    assert pyramid.shape == (40, 50, HOG_DIMENSION)
    cells = cell_histograms(stripes((40, 50)), 16)
    assert cells.shape == (3, 4, 8)
    np.testing.assert_allclose(cells.sum(axis=2), 1.0)
    np.testing.assert_allclose(pyramid[0, 0, 8:16], cells[0, 0])
    np.testing.assert_array_equal(hog_pyramid(Image(np.full((16, 16), 0.5))), 0.0)


def test_tilt_from_ratio_inverts_the_cosine_law():
    assert tilt_from_ratio(1.0) == 0.0
    assert tilt_from_ratio(np.cos(np.pi / 4) ** 3) == pytest.approx(np.pi / 4)
    assert tilt_from_ratio(0.0) == pytest.approx(np.pi / 2)
    assert orientation_ratio(np.zeros(8)) == 1.0
