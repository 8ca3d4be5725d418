import numpy as np
import pytest

from pbpvision.errors import ConfigError, DataError, DimensionMismatchError
from pbpvision.imaging.hog import HOG_DIMENSION
from pbpvision.imaging.image import Image
from pbpvision.imaging.segmentation import Segmentation
from pbpvision.inference.mcmc import RngStream
from pbpvision.stereo.energy import (
    StereoEnergyModel,
    StereoEnergyParams,
    smoothness_energy,
    texture_energy,
    total_energy,
)
from pbpvision.synthetic.stereo_scenes import render_plane_scene

TWO_SEGMENTS = Segmentation(np.array([[0, 0, 1], [0, 1, 1]]))


@pytest.fixture(scope="module")
def scene():
    return render_plane_scene(24, 32, rng=RngStream(3))


@pytest.fixture(scope="module")
def model(scene):
    return StereoEnergyModel(scene.left, scene.right, scene.segmentation)


def test_parameter_validation_and_dicts():
    with pytest.raises(ConfigError):
        StereoEnergyParams(match_weights=np.ones(3))
    with pytest.raises(ConfigError):
        StereoEnergyParams(lambda_s=-1.0)
    with pytest.raises(ConfigError):
        StereoEnergyParams(beta_a=np.zeros(HOG_DIMENSION + 1))
    params = StereoEnergyParams(lambda_s=3.0)
    restored = StereoEnergyParams.from_dict(params.to_dict())
    assert restored.lambda_s == 3.0
    np.testing.assert_array_equal(restored.match_weights, params.match_weights)
    with pytest.raises(ConfigError):
        StereoEnergyParams.from_dict({"lambda_z": 1.0})
    clamped = params.with_beta_y([1.0, -2.0, 0.25, 0.0])
    np.testing.assert_allclose(clamped.beta_y, [1.0, 0.0, 0.25, 0.0])
    assert params.lambda_s == 3.0


def test_smoothness_sums_boundary_gaps():
    planes = np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 5.0]])
    assert smoothness_energy(TWO_SEGMENTS, planes, StereoEnergyParams(lambda_s=2.0)) == pytest.approx(18.0)
    assert smoothness_energy(TWO_SEGMENTS, planes, StereoEnergyParams(lambda_s=2.0, tau_s=10.0)) == pytest.approx(10.0)
    with pytest.raises(DataError):
        smoothness_energy(TWO_SEGMENTS, planes[:1], StereoEnergyParams())


def test_texture_energy_with_zero_predictors():
    hog = np.zeros((2, 3, HOG_DIMENSION))
    planes = np.array([[0.1, 0.0, 2.0], [0.1, 0.0, 5.0]])
    assert texture_energy(hog, TWO_SEGMENTS, planes, StereoEnergyParams()) == pytest.approx(0.03)
    capped = StereoEnergyParams(tau_t=0.001)
    assert texture_energy(hog, TWO_SEGMENTS, planes, capped) == pytest.approx(0.006)


def test_true_planes_match_better_than_shifted_ones(scene, model):
    shifted = scene.planes + [0.0, 0.0, 1.5]
    assert model.match_energy(scene.planes) < model.match_energy(shifted)


def test_local_energy_tracks_total_energy(scene, model):
    planes = scene.planes.copy()
    i = 3
    candidates = np.stack([planes[i], planes[i] + [0.01, -0.02, 0.7], planes[i] + [0.0, 0.0, -2.0]])
    local = model.local_energy(i, planes, candidates)
    base = model.total_energy(planes)
    for k, candidate in enumerate(candidates):
        changed = planes.copy()
        changed[i] = candidate
        assert model.total_energy(changed) - base == pytest.approx(local[k] - local[0], rel=1e-7, abs=1e-6)


def test_gradient_of_untruncated_terms(scene, model):
    params = StereoEnergyParams(lambda_s=0.5, tau_s=1e9, lambda_a=0.5, tau_t=1e9)
    linear = model.with_params(params)
    gradient = linear.energy_gradient(scene.planes)
    bumped = model.with_params(params.with_beta_y(params.beta_y + [1.0, 0.0, 1.0, 0.0]))
    assert bumped.smoothness_energy(scene.planes) - linear.smoothness_energy(scene.planes) == pytest.approx(gradient[0])
    assert bumped.texture_energy(scene.planes) - linear.texture_energy(scene.planes) == pytest.approx(gradient[2])
    assert gradient[1] == 0.0


def test_truncated_pairs_count_towards_the_cap(scene, model):
    capped = model.with_params(StereoEnergyParams(lambda_s=1.0, tau_s=1e-6))
    gradient = capped.energy_gradient(scene.planes)
    differing = sum(
        1 for i, j in scene.segmentation.edges if not np.allclose(scene.planes[i], scene.planes[j])
    )
    assert gradient[1] >= differing


def test_residuals_and_out_of_bounds_pixels(scene, model):
    residuals = model.match_residuals(scene.planes)
    assert residuals.shape[1] == 9
    assert residuals.shape[0] + model.out_of_bounds_count(scene.planes) == 24 * 32
    assert model.out_of_bounds_count(scene.planes) > 0


def test_extra_unary_enters_the_total(scene, model):
    extra = model.with_extra_unary(lambda i, planes: np.full(len(planes), 2.0))
    breakdown = extra.energy(scene.planes)
    assert breakdown.extra == pytest.approx(2.0 * scene.segmentation.n_segments)
    assert breakdown.total == pytest.approx(model.total_energy(scene.planes) + breakdown.extra)


def test_total_energy_tuple(scene):
    e_m, e_s, e_t, e = total_energy(scene.left, scene.right, scene.segmentation, scene.planes, StereoEnergyParams())
    assert e == pytest.approx(e_m + e_s + e_t)


def test_model_checks_shapes(scene):
    with pytest.raises(DimensionMismatchError):
        StereoEnergyModel(scene.left, Image(np.zeros((24, 31))), scene.segmentation)
    with pytest.raises(DimensionMismatchError):
        StereoEnergyModel(scene.left, scene.right, TWO_SEGMENTS)
