import numpy as np
import pytest

from pbpvision.errors import ConfigError, DataError, DimensionMismatchError, EvaluationError
from pbpvision.imaging.features import monocular_features
from pbpvision.imaging.image import Image, save_image, save_pfm
from pbpvision.inference.mcmc import RngStream
from pbpvision.mde.baseline import fit_depth_scale, ground_plane_baseline, rms_disparity, rms_vs_groundtruth
from pbpvision.mde.corpus import METRIC_COLUMNS, StereoPair, load_corpus, save_metrics
from pbpvision.mde.model import (
    MdeParams,
    bootstrap_em,
    infer_disparity,
    mde_energy,
    mono_cost_volume,
    monocular_infer,
)
from pbpvision.mde.view import distortion, fill_holes, forward_warp, view_predict, view_prediction_error
from pbpvision.synthetic.stereo_scenes import render_mono_corpus, render_plane_scene


@pytest.fixture(scope="module")
def textured():
    return Image(np.random.default_rng(4).random((6, 8, 3)))


def test_predicting_the_channel_means_scores_one(textured):
    flat = Image(np.broadcast_to(textured.mean, textured.data.shape))
    assert distortion(flat, textured) == pytest.approx(1.0, abs=1e-9)
    assert distortion(textured, textured) == 0.0


def test_distortion_checks(textured):
    with pytest.raises(EvaluationError):
        distortion(textured, Image(np.full((6, 8, 3), 0.2)))
    with pytest.raises(EvaluationError):
        distortion(textured, textured, np.zeros((6, 8), dtype=bool))
    with pytest.raises(DimensionMismatchError):
        distortion(textured, Image(np.zeros((6, 7, 3))))


def test_zero_disparity_reproduces_the_view(textured):
    prediction = view_predict(textured, np.zeros((6, 8)))
    np.testing.assert_allclose(prediction.image.data, textured.data)
    assert prediction.filled.all()


def test_constant_shift_leaves_holes_on_the_right(textured):
    prediction = view_predict(textured, np.full((6, 8), 2.0))
    np.testing.assert_allclose(prediction.image.data[:, :6], textured.data[:, 2:])
    assert not prediction.filled[:, 6:].any()
    np.testing.assert_allclose(prediction.image.data[:, 6], textured.data[:, 7])
    with pytest.raises(DimensionMismatchError):
        view_predict(textured, np.zeros((5, 8)))


def test_closest_point_wins_a_collision():
    values = np.array([[[1.0], [2.0], [3.0]]])
    warped, landed, key = forward_warp(values, np.array([[1.0, 1.0, 2.0]]), np.zeros((1, 3)), np.array([[5.0, 1.0, 0.0]]))
    assert warped[0, 1, 0] == 1.0
    assert landed.tolist() == [[False, True, True]]
    assert np.isnan(key[0, 0])


def test_holes_take_the_farther_side():
    values = np.array([[[1.0], [0.0], [3.0]]])
    landed = np.array([[True, False, True]])
    key = np.array([[9.0, np.nan, 2.0]])
    assert fill_holes(values, landed, key)[0, 1, 0] == 3.0


def test_true_disparity_predicts_the_right_view():
    scene = render_plane_scene(
        24, 40, surfaces=[[0.0, 0.0, 4.0]], surface_labels=np.zeros((24, 40), dtype=int), rng=RngStream(6)
    )
    assert view_prediction_error(scene.left, scene.right, scene.disparity) < 0.05
    assert view_prediction_error(scene.left, scene.right, np.zeros((24, 40))) > 0.1


def test_ground_plane_baseline_uses_row_means():
    maps = [np.array([[1.0, 3.0], [4.0, 4.0]]), np.array([[3.0, 1.0], [6.0, 6.0]])]
    baseline = ground_plane_baseline(maps)
    np.testing.assert_allclose(baseline.predict((2, 5)), [[2.0] * 5, [5.0] * 5])
    with pytest.raises(DimensionMismatchError):
        baseline.predict((3, 2))
    with pytest.raises(DataError):
        ground_plane_baseline([])


def test_depth_scale_and_rms():
    depths = [np.array([[1.0, 2.0], [4.0, 8.0]])]
    disparities = [3.0 / depths[0]]
    c = fit_depth_scale(disparities, depths)
    assert c == pytest.approx(3.0)
    assert rms_vs_groundtruth(disparities[0], depths[0], c) == pytest.approx(0.0, abs=1e-12)
    assert rms_disparity(np.zeros(4), np.full(4, 2.0)) == 2.0


def test_params_and_weights_are_checked():
    with pytest.raises(ConfigError):
        MdeParams(tau_d=-1.0)
    with pytest.raises(ConfigError):
        MdeParams(d_max=-1)
    with pytest.raises(DimensionMismatchError):
        MdeParams(w=np.zeros((3, 4))).weights(48)
    assert MdeParams().weights(48).shape == (40, 48)


def test_mono_terms():
    volume = mono_cost_volume(np.array([[1.5]]), 3)
    np.testing.assert_allclose(volume[0, 0], [2.25, 0.25, 0.25, 2.25])
    image = Image(np.random.default_rng(5).random((40, 16)))
    np.testing.assert_array_equal(monocular_infer(image, MdeParams(d_max=8)), 0)


@pytest.fixture(scope="module")
def mono_corpus():
    pairs, w = render_mono_corpus(2, 40, 48, d_max=12, rng=RngStream(7))
    return [StereoPair(f"p{n}", left, right, d) for n, (left, right, d) in enumerate(pairs)], w


def test_monocular_law_reproduces_the_rendered_disparity(mono_corpus):
    corpus, w = mono_corpus
    d = monocular_infer(corpus[0].left, MdeParams(w=w, d_max=12, lambda_s=0.0))
    np.testing.assert_array_equal(d, corpus[0].disparity)


def test_energy_terms(mono_corpus):
    corpus, w = mono_corpus
    params = MdeParams(w=w, d_max=12)
    energy = mde_energy(corpus[0], corpus[0].disparity, params)
    assert energy.total == pytest.approx(energy.data + energy.smooth + energy.mono)
    assert energy.mono < 0.25 * corpus[0].disparity.size
    with pytest.raises(DimensionMismatchError):
        mde_energy(corpus[0], np.zeros((3, 3)), params)
    with pytest.raises(ConfigError):
        infer_disparity(corpus[0], params, use_stereo=False, use_mono=False)


def test_bootstrap_objective_never_increases(mono_corpus):
    corpus, _ = mono_corpus
    params, history = bootstrap_em(corpus, MdeParams(d_max=12), iters=2)
    assert len(history) == 4
    assert all(b <= a + 1e-6 * abs(a) for a, b in zip(history, history[1:]))
    assert params.w.shape == (40, monocular_features(corpus[0].left).dimension)
    assert bootstrap_em(corpus, iters=0)[1] == []


def test_corpus_folders(tmp_path, textured):
    for name in ("b", "a"):
        save_image(textured, tmp_path / "corpus" / name / "left.ppm")
        save_image(textured, tmp_path / "corpus" / name / "right.ppm")
    save_pfm(np.ones((6, 8)), tmp_path / "corpus" / "a" / "gt.pfm")
    pairs = load_corpus(str(tmp_path / "corpus"))
    assert [pair.name for pair in pairs] == ["a", "b"]
    np.testing.assert_array_equal(pairs[0].disparity, 1.0)
    assert pairs[1].disparity is None
    with pytest.raises(DataError):
        load_corpus(str(tmp_path / "nowhere"))
    (tmp_path / "broken" / "x").mkdir(parents=True)
    with pytest.raises(DataError):
        load_corpus(str(tmp_path / "broken"))
    frame = save_metrics([{"pair": "a", "distortion": 0.5, "rms": 1.0}], str(tmp_path / "m.csv"))
    assert list(frame.columns) == METRIC_COLUMNS
