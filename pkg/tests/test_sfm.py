import numpy as np
import pandas as pd
import pytest

from pbpvision.errors import BehindCameraError, ConfigError, DimensionMismatchError
from pbpvision.inference.mcmc import RngStream
from pbpvision.sfm import (
    RESULT_COLUMNS,
    compare_run,
    mode_baseline,
    reconstruction_errors,
    reproject,
    reprojection_log_potential,
    rotation_matrix,
    run_comparison,
    save_results,
    sfm_graph,
    sfm_pbp,
    synth_scene,
)

SMALL = {
    "n_points": 4,
    "n_cams": 2,
    "sigma": 1.0,
    "focal": 500.0,
    "n_particles": 8,
    "rounds": 1,
    "mh_steps": 2,
    "message_iters": 2,
    "init_spread": 1.0,
    "proposal_spread": 1.0,
}


def test_rotations_are_orthonormal():
    np.testing.assert_allclose(rotation_matrix(np.zeros(3)), np.eye(3))
    rotations = rotation_matrix(np.random.default_rng(0).uniform(-np.pi, np.pi, (5, 3)))
    for rotation in rotations:
        np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(rotation) == pytest.approx(1.0)


def test_rotation_about_the_optical_axis():
    rotation = rotation_matrix([0.0, 0.0, np.pi / 2])
    np.testing.assert_allclose(rotation @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)


def test_pinhole_projection():
    np.testing.assert_allclose(reproject(np.zeros(6), [1.0, 2.0, 4.0], focal=2.0), [0.5, 1.0])
    shifted = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(reproject(shifted, [1.0, 2.0, 4.0], focal=2.0), [1.0, 1.0])
    with pytest.raises(BehindCameraError):
        reproject(np.zeros(6), [0.0, 0.0, -1.0])
    with pytest.raises(ConfigError):
        reproject(np.zeros(6), [0.0, 0.0, 1.0], focal=0.0)


def test_reprojection_potential():
    potential = reprojection_log_potential([0.5, 1.0], sigma=0.5, focal=2.0)
    assert potential(np.zeros(6), np.array([1.0, 2.0, 4.0])) == pytest.approx(0.0)
    # one pixel off in x: -1 / (2 * 0.25)
    assert potential(np.zeros(6), np.array([3.0, 2.0, 4.0])) == pytest.approx(-2.0)
    assert potential(np.zeros(6), np.array([1.0, 2.0, -4.0])) == -np.inf
    batch = potential(np.zeros((3, 6)), np.array([[1.0, 2.0, 4.0]]))
    assert batch.shape == (3,)
    with pytest.raises(ConfigError):
        reprojection_log_potential([0.0, 0.0], sigma=0.0, focal=1.0)


def test_noiseless_scene_is_exact():
    scene = synth_scene(6, 3, sigma=0.0, rng=RngStream(1))
    assert scene.observations.shape == (3, 6, 2)
    assert scene.n_cams == 3 and scene.n_points == 6
    exact = reproject(scene.poses[:, None, :], scene.points[None, :, :], scene.focal)
    np.testing.assert_allclose(scene.observations, exact)
    assert reconstruction_errors(scene, scene.poses, scene.points) == (0.0, 0.0)
    with pytest.raises(DimensionMismatchError):
        reconstruction_errors(scene, scene.poses[:2], scene.points)


def test_scene_checks():
    with pytest.raises(ConfigError):
        synth_scene(0, 3)
    with pytest.raises(ConfigError):
        synth_scene(5, 2, sigma=-1.0)


def test_errors_sum_euclidean_norms():
    scene = synth_scene(2, 1, sigma=0.0, rng=RngStream(2))
    points = scene.points + np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 1.0]])
    assert reconstruction_errors(scene, scene.poses, points) == pytest.approx((0.0, 6.0))


def test_mode_baseline_lowers_the_cost():
    scene = synth_scene(8, 3, sigma=1.0, rng=RngStream(3))
    result = mode_baseline(scene.observations, scene.poses, scene.points, optimize_cameras=False)
    assert result.final_cost <= result.initial_cost
    np.testing.assert_array_equal(result.poses, scene.poses)
    assert result.points.shape == scene.points.shape

    full = mode_baseline(scene.observations, scene.poses, scene.points)
    assert full.final_cost <= full.initial_cost
    assert full.n_evaluations > 0


def test_mode_baseline_stays_at_an_exact_solution():
    scene = synth_scene(6, 2, sigma=0.0, rng=RngStream(4))
    result = mode_baseline(scene.observations, scene.poses, scene.points, sigma=0.0, optimize_cameras=False)
    assert result.initial_cost == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(result.points, scene.points)


def test_bipartite_graph():
    scene = synth_scene(3, 2, rng=RngStream(5))
    graph = sfm_graph(scene.observations, 1.0, scene.focal)
    assert graph.num_variables == 5
    assert len(graph.edges) == 6


def test_pbp_posterior_stays_near_the_truth():
    scene = synth_scene(4, 2, sigma=1.0, rng=RngStream(6))
    posterior = sfm_pbp(
        scene.observations, scene.poses, scene.points, n_particles=8, rounds=1, rng=RngStream(7), mh_steps=2
    )
    assert posterior.poses.shape == (2, 6)
    assert posterior.points.shape == (4, 3)
    assert np.all(posterior.point_spread >= 0)
    _, map_err = reconstruction_errors(scene, posterior.poses, posterior.points)
    assert map_err < 0.5
    with pytest.raises(ConfigError):
        sfm_pbp(scene.observations, scene.poses, scene.points, sigma=0.0)


def test_compare_run_rows():
    rows = compare_run(0, RngStream(8), SMALL)
    assert [row["method"] for row in rows] == ["pbp", "mode"]
    assert all(row["run"] == 0 for row in rows)
    assert all(np.isfinite(row["map_err"]) for row in rows)


def test_comparison_does_not_depend_on_threads():
    kwargs = {key: SMALL[key] for key in ("n_points", "n_cams", "n_particles", "rounds", "mh_steps")}
    single = run_comparison(n_runs=2, rng=RngStream(9), threads=1, **kwargs)
    pooled = run_comparison(n_runs=2, rng=RngStream(9), threads=2, **kwargs)
    assert list(single.columns) == RESULT_COLUMNS
    assert len(single) == 4
    pd.testing.assert_frame_equal(single, pooled)


def test_result_file(tmp_path):
    path = tmp_path / "sfm" / "results.csv"
    save_results([{"run": 0, "method": "pbp", "pose_err": 0.1, "map_err": 0.2}], path)
    assert list(pd.read_csv(path).columns) == RESULT_COLUMNS
