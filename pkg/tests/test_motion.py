import numpy as np
import pandas as pd
import pytest

from pbpvision.errors import (
    BehindCameraError,
    ConfigError,
    EpipoleUnreliableError,
    TooFewMatchesError,
)
from pbpvision.imaging.image import Image
from pbpvision.inference.mcmc import RngStream
from pbpvision.motion.epipole import estimate_epipole, fundamental_matrix, normalize_points
from pbpvision.motion.kinematics import (
    depth_change,
    forward_project,
    next_disparity,
    valid_motion,
    velocity_from_depth_change,
    velocity_from_ratio,
)
from pbpvision.motion.matching import harris_corners, sparse_matches
from pbpvision.motion.pipeline import (
    ERROR_COLUMNS,
    FrameQuad,
    alternate,
    fourth_view_error,
    initial_velocities,
    metropolis_velocity_sweep,
    predict_fourth_view,
    save_errors,
)
from pbpvision.motion.velocity import MotionEnergyModel, MotionParams, sample_bilinear
from pbpvision.stereo.inference import PlaneInferenceConfig
from pbpvision.synthetic.motion_scenes import render_motion_scene


@pytest.fixture(scope="module")
def scene():
    return render_motion_scene(rng=RngStream(4))


@pytest.fixture(scope="module")
def model(scene):
    return MotionEnergyModel(scene.left_t, scene.left_t1, scene.segmentation, scene.epipole)


def radial_matches(rng, epipole, n=30):
    points = np.column_stack([rng.uniform(0, 64, n), rng.uniform(0, 48, n)])
    scale = rng.uniform(0.8, 0.95, n)[:, None]
    moved = epipole + (points - epipole) / scale
    return np.hstack([points, moved])


def test_disparity_grows_as_the_point_approaches():
    assert next_disparity(2.0, 0.25) == pytest.approx(4.0)
    assert next_disparity(3.0, 0.0) == pytest.approx(3.0)
    x, y = forward_project(14.0, 7.0, 2.0, 0.25, (10.0, 10.0))
    assert x == pytest.approx(18.0)
    assert y == pytest.approx(4.0)


def test_point_passing_the_camera_is_rejected():
    assert not valid_motion(4.0, 0.25)
    with pytest.raises(BehindCameraError):
        next_disparity(4.0, 0.25)
    with pytest.raises(BehindCameraError):
        forward_project(np.zeros(2), np.zeros(2), np.array([1.0, 5.0]), 0.25, (0.0, 0.0))


def test_velocity_recovered_from_radial_ratio():
    d = np.array([1.0, 2.0, 5.0])
    v = np.array([0.1, -0.05, 0.02])
    ratio = 1.0 / (1.0 - d * v)
    np.testing.assert_allclose(velocity_from_ratio(d, ratio), v)


def test_depth_change_conversions():
    assert depth_change(0.02, 50.0, 0.4) == pytest.approx(0.4)
    assert velocity_from_depth_change(0.4, 50.0, 0.4) == pytest.approx(0.02)
    with pytest.raises(ConfigError):
        depth_change(0.1, 0.0, 0.4)
    with pytest.raises(ConfigError):
        velocity_from_depth_change(0.1, 50.0, -1.0)


def test_normalized_points_have_unit_spread():
    points = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]])
    normalized, transform = normalize_points(points)
    np.testing.assert_allclose(normalized[:, :2].mean(axis=0), 0.0, atol=1e-12)
    assert np.mean(np.linalg.norm(normalized[:, :2], axis=1)) == pytest.approx(np.sqrt(2))
    assert transform[2, 2] == 1.0


def test_epipole_of_radial_matches():
    rng = np.random.default_rng(0)
    epipole = np.array([30.0, 20.0])
    matches = radial_matches(rng, epipole)
    np.testing.assert_allclose(estimate_epipole(matches), epipole, atol=1e-5)

    f = fundamental_matrix(matches)
    assert np.linalg.matrix_rank(f, tol=1e-8 * np.abs(f).max()) == 2
    x0 = np.column_stack([matches[:, :2], np.ones(len(matches))])
    x1 = np.column_stack([matches[:, 2:], np.ones(len(matches))])
    residual = np.einsum("ni,ij,nj->n", x1, f / np.linalg.norm(f), x0)
    assert np.abs(residual).max() < 1e-6


def test_epipole_needs_enough_informative_matches():
    rng = np.random.default_rng(1)
    with pytest.raises(TooFewMatchesError):
        estimate_epipole(radial_matches(rng, np.array([30.0, 20.0]), n=5))
    still = rng.uniform(0, 40, (20, 2))
    with pytest.raises(EpipoleUnreliableError):
        estimate_epipole(np.hstack([still, still]))


def test_velocity_labels_include_zero():
    params = MotionParams()
    labels = params.labels
    assert len(labels) == 64
    assert np.any(labels == 0.0)
    assert labels.max() == pytest.approx(0.8 / 16)
    np.testing.assert_allclose(np.diff(labels), params.step)

    odd = MotionParams(n_labels=5, v_max=0.1)
    np.testing.assert_allclose(odd.labels, [-0.05, 0.0, 0.05, 0.1, 0.15])


@pytest.mark.parametrize(
    "kwargs",
    [{"n_labels": 1}, {"d_max": 0}, {"v_max": 0.0}, {"tau_v": -1.0}, {"match_weights": np.ones(3)}],
)
def test_motion_params_validation(kwargs):
    with pytest.raises(ConfigError):
        MotionParams(**kwargs)


def test_bilinear_lookup_of_a_ramp():
    ys, xs = np.indices((6, 8), dtype=float)
    features = np.stack([xs, ys], axis=-1)
    values, inside = sample_bilinear(features, np.array([1.5, -0.5, 7.0]), np.array([2.25, 1.0, 5.0]))
    np.testing.assert_allclose(values[0], [1.5, 2.25])
    np.testing.assert_allclose(values[2], [7.0, 5.0])
    np.testing.assert_array_equal(inside, [True, False, True])


def test_true_motion_matches_better_than_no_motion(scene, model):
    planes = scene.planes
    still = np.zeros(scene.segmentation.n_segments)
    assert model.match_energy(planes, scene.velocities) < model.match_energy(planes, still)


def test_motion_costs_and_smoothness(scene, model):
    i = 0
    costs = model.velocity_costs(i, scene.planes[i])
    assert costs.shape == (64,)
    assert np.all(costs >= 0)

    table = model.smoothness_table()
    assert table.shape == (64, 64)
    np.testing.assert_allclose(np.diag(table), 0.0)
    assert table.max() == pytest.approx(model.params.tau_v)

    flat = np.zeros(scene.segmentation.n_segments)
    assert model.smoothness_energy(flat) == 0.0
    np.testing.assert_allclose(model.smoothness_gradient(flat), [0.0, 0.0])

    unary = model.extra_unary(flat)
    assert unary(i, np.vstack([scene.planes[i], scene.planes[i] + [0, 0, 1]])).shape == (2,)


def test_impossible_velocity_costs_infinity(scene, model):
    i = 0
    d = scene.planes[i, 2]
    cost = model.match_costs(i, scene.planes[i], [2.0 / d])
    assert np.isinf(cost[0, 0])


def test_zero_motion_predicts_the_left_view():
    left = Image(np.random.default_rng(2).uniform(size=(10, 12, 3)))
    predicted, landed = predict_fourth_view(left, np.zeros((10, 12)), 0.0, (6.0, 5.0))
    assert landed.all()
    np.testing.assert_allclose(predicted, left.data)


def test_fourth_view_error_prefers_the_true_velocities(scene):
    frames = FrameQuad.from_scene(scene)
    still = np.zeros(scene.segmentation.n_segments)
    truth = fourth_view_error(frames, scene.segmentation, scene.planes, scene.velocities, scene.epipole)
    wrong = fourth_view_error(frames, scene.segmentation, scene.planes, still, scene.epipole)
    assert truth < wrong


def test_initial_velocities_snap_the_sparse_prior_to_the_grid():
    params = MotionParams(n_labels=8, v_max=0.04)
    field = initial_velocities({0: 0.021, 2: 1.0, 3: np.nan}, 4, params)
    np.testing.assert_allclose(field.values, [0.02, 0.0, 0.04, 0.0])
    np.testing.assert_allclose(params.labels[field.labels], field.values)


def test_corners_of_a_bright_square():
    gray = np.zeros((32, 32))
    gray[10:20, 10:20] = 1.0
    corners = harris_corners(gray)
    assert len(corners) >= 4
    expected = np.array([[10, 10], [19, 10], [10, 19], [19, 19]])
    for corner in expected:
        assert np.min(np.abs(corners - corner).max(axis=1)) <= 2


def test_textureless_frames_have_no_matches():
    flat = Image(np.full((24, 24, 3), 0.5))
    assert sparse_matches(flat, flat).shape == (0, 4)


def test_matches_on_a_motion_scene_point_away_from_the_epipole(scene):
    matches = sparse_matches(scene.left_t, scene.left_t1, epipole=scene.epipole)
    assert matches.shape[1] == 4
    assert len(matches) > 0
    r0 = np.linalg.norm(matches[:, :2] - scene.epipole, axis=1)
    r1 = np.linalg.norm(matches[:, 2:] - scene.epipole, axis=1)
    assert np.median(r1 - r0) >= -0.5


def test_alternation_recovers_the_approaching_box(scene):
    frames = FrameQuad.from_scene(scene)
    config = PlaneInferenceConfig(rounds=1, n_candidates=4, d_max=12)
    result = alternate(
        frames,
        scene.segmentation,
        plane_config=config,
        iters=1,
        rng=RngStream(8),
        epipole=scene.epipole,
        init_planes=scene.planes,
    )
    assert result.planes.shape == scene.planes.shape
    assert len(result.error_history) == 2
    assert result.error_history[1] <= result.error_history[0]
    assert np.all(np.isfinite(result.error_history))

    values = result.velocities.values
    moving = scene.velocities > 0
    assert np.median(values[moving]) == pytest.approx(0.02, abs=0.006)
    assert np.median(values[~moving]) == pytest.approx(0.0, abs=0.006)


def test_alternation_needs_an_iteration(scene):
    with pytest.raises(ConfigError):
        alternate(FrameQuad.from_scene(scene), scene.segmentation, iters=0)


def test_three_alternations_lower_the_fourth_view_error(scene):
    result = alternate(
        FrameQuad.from_scene(scene),
        scene.segmentation,
        plane_config=PlaneInferenceConfig(rounds=2, n_candidates=6, d_max=12),
        iters=3,
        rng=RngStream(9),
        epipole=scene.epipole,
    )
    history = result.error_history
    assert len(history) == 4
    assert all(later <= earlier for earlier, later in zip(history, history[1:]))
    assert history[-1] <= 0.95 * history[0]


def test_true_velocities_predict_the_fourth_view_best(scene):
    frames = FrameQuad.from_scene(scene)
    step = MotionParams(n_labels=8).step
    truth = fourth_view_error(frames, scene.segmentation, scene.planes, scene.velocities, scene.epipole)
    first_pixels = [scene.segmentation.pixels(i) for i in range(scene.segmentation.n_segments)]
    owners = np.array([scene.object_labels[py[0], px[0]] for py, px in first_pixels])
    for k in np.unique(owners):
        for sign in (-1.0, 1.0):
            perturbed = scene.velocities + sign * step * (owners == k)
            error = fourth_view_error(frames, scene.segmentation, scene.planes, perturbed, scene.epipole)
            assert truth <= error


def test_zero_temperature_sweep_keeps_labels(scene, model):
    labels = np.full(scene.segmentation.n_segments, 32)
    swept = metropolis_velocity_sweep(model, scene.planes, labels, RngStream(1), temperature=0.0)
    np.testing.assert_array_equal(swept, labels)


def test_error_file(tmp_path):
    path = tmp_path / "out" / "errors.csv"
    save_errors([0.3, 0.2], path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ERROR_COLUMNS
    assert frame[ERROR_COLUMNS[0]].tolist() == [0, 1]
