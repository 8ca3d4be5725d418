import json
import logging

import numpy as np
import pandas as pd
import pytest

from pbpvision.errors import ConfigError, DataError
from pbpvision.inference.graph import brute_force_joint, brute_force_marginals, energy, log_partition
from pbpvision.inference.mcmc import (
    DiscreteProposal,
    RngStream,
    TargetDensity,
    gibbs_sweep,
    graph_conditionals,
    mh_transition,
)
from pbpvision.learning.cd import contrastive_divergence, cd_gradient, metropolis_plane_sweep
from pbpvision.learning.hard_em import (
    LOG_COLUMNS,
    TrainConfig,
    build_models,
    closed_form_match_weights,
    hard_e_steps,
    m_step,
    match_weight_loss,
    ridge_lstsq,
    supervised_latents,
    train,
)
from pbpvision.learning.params import initial_params, load_params, save_params
from pbpvision.mde.corpus import StereoPair
from pbpvision.stereo.energy import StereoEnergyParams
from pbpvision.stereo.inference import PlaneInferenceConfig
from pbpvision.synthetic.graphs import chain_graph
from pbpvision.synthetic.stereo_scenes import render_plane_scene


@pytest.fixture(scope="module")
def pair():
    return StereoPair.from_scene("tiny", render_plane_scene(24, 32, rng=RngStream(31)))


@pytest.fixture(scope="module")
def models(pair):
    return build_models([pair], initial_params())


@pytest.fixture(scope="module")
def true_planes(pair, models):
    return supervised_latents(models[0], pair.disparity, RngStream(0))


def test_parameter_files(tmp_path):
    params = initial_params()
    params.lambda_s = 1.25
    params.beta_a[3] = -0.5
    save_params(params, tmp_path / "params.json")
    blocks = json.loads((tmp_path / "params.json").read_text())
    assert set(blocks) == {"match", "smoothness", "texture"}
    loaded = load_params(tmp_path / "params.json")
    assert loaded.lambda_s == 1.25
    np.testing.assert_array_equal(loaded.beta_a, params.beta_a)

    (tmp_path / "bad.json").write_text('{"motion": {}}')
    with pytest.raises(ConfigError):
        load_params(tmp_path / "bad.json")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(ConfigError):
        load_params(tmp_path / "broken.json")
    with pytest.raises(DataError):
        load_params(tmp_path / "missing.json")


def test_initial_params_without_texture():
    params = initial_params(texture=False)
    assert params.lambda_a == 0.0 and params.lambda_b == 0.0
    assert params.lambda_s == 2.0 and params.tau_s == 200.0


def test_closed_form_match_weights_minimize_the_loss():
    residuals = np.random.default_rng(0).normal(size=(500, 9)) * np.arange(1, 10)
    residuals[:, 8] = 0.0
    current = np.full(9, 0.7)
    weights = closed_form_match_weights(residuals, current)
    np.testing.assert_allclose(weights[:8], 500 / (2 * np.sum(residuals[:, :8] ** 2, axis=0)))
    assert weights[8] == 0.7
    loss = match_weight_loss(residuals[:, :8], weights[:8])
    for factor in (0.9, 1.1):
        assert loss < match_weight_loss(residuals[:, :8], factor * weights[:8])


def test_ridge_regression_on_a_rank_deficient_design(caplog):
    design = np.ones((5, 2))
    with caplog.at_level(logging.WARNING):
        solution = ridge_lstsq(design, np.full(5, 2.0), 1e-6, "for a test")
    assert "Rank deficient" in caplog.text
    assert solution.sum() == pytest.approx(2.0, rel=1e-4)


def test_contrastive_divergence_averages_sample_gradients():
    direction = contrastive_divergence(
        [0.0, 1.0, 2.0],
        lambda i, state: np.array([state, 1.0]),
        lambda i, state, rng: state + 1.0,
        RngStream(0),
        n_samples=3,
    )
    np.testing.assert_allclose(direction, [3.0, 0.0])


def toy_chain(theta):
    """3-node chain over 3 labels with energy a·#zeros + b·#ones + w·#disagreeing neighbors"""
    a, b, w = theta
    return chain_graph([-np.array([a, b, 0.0])] * 3, [-w * (1.0 - np.eye(3))] * 2)


def toy_features(state):
    state = np.asarray(state)
    return np.array(
        [np.sum(state == 0), np.sum(state == 1), np.sum(state[1:] != state[:-1])], dtype=float
    )


def toy_expected_features(graph):
    marginals = brute_force_marginals(graph)
    joint = brute_force_joint(graph)
    disagree = np.sum(joint * (1.0 - np.eye(3))[:, :, None]) + np.sum(joint * (1.0 - np.eye(3))[None, :, :])
    return np.array([sum(m[0] for m in marginals), sum(m[1] for m in marginals), disagree])


def toy_data(graph, n, rng):
    joint = brute_force_joint(graph)
    flat = rng.choice(joint.size, size=n, p=joint.ravel())
    return list(np.stack(np.unravel_index(flat, joint.shape), axis=1))


def test_cd_direction_follows_the_exact_likelihood_gradient():
    stream = RngStream(17)
    agreeing = 0
    for draw in range(200):
        draw_stream = stream.child(draw)
        theta = np.concatenate([draw_stream.uniform(-2.0, 2.0, 2), draw_stream.uniform(-0.5, 0.5, 1)])
        truth = np.concatenate([draw_stream.uniform(-2.0, 2.0, 2), draw_stream.uniform(-0.5, 0.5, 1)])
        data = toy_data(toy_chain(truth), 20, draw_stream.child(0))
        graph = toy_chain(theta)
        conditionals = graph_conditionals(graph)
        direction = contrastive_divergence(
            data,
            lambda i, state: toy_features(state),
            lambda i, state, rng: gibbs_sweep(conditionals, state, rng),
            draw_stream.child(1),
            n_samples=10,
        )
        exact = len(data) * toy_expected_features(graph) - np.sum([toy_features(z) for z in data], axis=0)
        agreeing += int(direction @ exact > 0)
    assert agreeing >= 190


def test_cd_update_vanishes_when_data_follow_the_model():
    features = np.array([[0.0, 1.0], [1.0, 0.5], [2.0, 0.0], [3.0, 0.5], [4.0, 1.0]])
    theta = np.array([0.4, -1.0])
    energies = features @ theta
    target = TargetDensity(lambda x: -energies[np.rint(x[..., 0]).astype(int)])
    proposal = DiscreteProposal(np.arange(5))
    probabilities = np.exp(-energies) / np.exp(-energies).sum()

    def metropolis_step(i, state, rng):
        x = np.array([float(state)])
        return int(mh_transition(target, proposal, x, target(x), rng)[0][0])

    stream = RngStream(23)
    updates = []
    for seed in range(1000):
        seed_stream = stream.child(seed)
        state = int(seed_stream.choice(5, p=probabilities))
        updates.append(
            contrastive_divergence(
                [state], lambda i, z: features[z], metropolis_step, seed_stream.child(0), n_samples=10
            )
        )
    updates = np.array(updates)
    standard_error = updates.std(axis=0, ddof=1) / np.sqrt(len(updates))
    assert np.all(np.abs(updates.mean(axis=0)) <= 3 * standard_error)


def test_smoothness_component_has_the_sign_of_the_likelihood_derivative():
    disparities = np.arange(4.0)
    gaps = np.abs(disparities[:, None] - disparities[None, :])
    unaries = [np.array([0.2, -0.1, 0.3, 0.0]), np.array([-0.2, 0.1, 0.0, 0.4])]

    def two_superpixels(lambda_s):
        return chain_graph(unaries, [-lambda_s * gaps])

    def log_likelihood(lambda_s, state):
        graph = two_superpixels(lambda_s)
        return -energy(graph, list(state)) - log_partition(graph)

    lambda_s, h = 0.8, 1e-5
    conditionals = graph_conditionals(two_superpixels(lambda_s))
    for state in ([0, 3], [1, 1]):
        finite_difference = (log_likelihood(lambda_s + h, state) - log_likelihood(lambda_s - h, state)) / (2 * h)
        direction = contrastive_divergence(
            [np.array(state)],
            lambda i, z: np.array([gaps[z[0], z[1]]]),
            lambda i, z, rng: gibbs_sweep(conditionals, z, rng),
            RngStream(29),
            n_samples=200,
        )
        assert np.sign(direction[0]) == np.sign(finite_difference) != 0


def test_cd_direction_is_zero_when_every_move_is_rejected(models, true_planes):
    direction = cd_gradient(models, [true_planes], RngStream(6), n_samples=1, temperature=0.0)
    np.testing.assert_array_equal(direction, 0.0)


def test_zero_temperature_sweeps_reject_every_move(models, true_planes):
    sampled = metropolis_plane_sweep(models[0], true_planes, RngStream(1), temperature=0.0, steps=2)
    np.testing.assert_array_equal(sampled, true_planes)


def test_supervised_latents_recover_the_true_planes(pair, models):
    planes = supervised_latents(models[0], pair.disparity, RngStream(0))
    ys, xs = np.indices(pair.disparity.shape)
    labels = models[0].segmentation.labels
    predicted = planes[labels, 0] * xs + planes[labels, 1] * ys + planes[labels, 2]
    np.testing.assert_allclose(predicted, pair.disparity, atol=1e-8)


def test_cd_direction_has_one_entry_per_trained_parameter(models, true_planes):
    direction = cd_gradient(models, [true_planes], RngStream(2), n_samples=2)
    assert direction.shape == (4,)
    assert np.all(np.isfinite(direction))


def test_m_step_without_texture_freezes_the_texture_term(models, true_planes):
    config = TrainConfig(steps=1, n_samples=2, texture=False)
    params = m_step(models, [true_planes], initial_params(), config, RngStream(3))
    assert params.lambda_a == 0.0 and params.lambda_b == 0.0
    np.testing.assert_array_equal(params.beta_a, 0.0)
    residuals = models[0].match_residuals(true_planes)
    np.testing.assert_allclose(params.match_weights, closed_form_match_weights(residuals, np.ones(9)))


def test_m_step_holds_the_border_charge_and_texture_cap(models, true_planes):
    start = initial_params()
    start.kappa_border = 7.5
    start.tau_t = 3.0
    params = m_step(models, [true_planes], start, TrainConfig(steps=2, n_samples=2), RngStream(10))
    assert params.kappa_border == 7.5
    assert params.tau_t == 3.0


def test_supervised_training_runs_one_m_step(pair):
    config = TrainConfig(steps=1, n_samples=2, mode="supervised")
    params, state, log = train([pair], config=config, rng=RngStream(4))
    assert isinstance(params, StereoEnergyParams)
    assert state.iteration == 1
    assert list(log.columns) == LOG_COLUMNS
    assert len(log) == 1 and np.isnan(log["holdout_distortion"][0])


def test_unsupervised_training_writes_its_log(pair, tmp_path):
    config = TrainConfig(
        iters=1, steps=1, n_samples=1, inference=PlaneInferenceConfig(rounds=1, n_candidates=4, d_max=14)
    )
    path = tmp_path / "logs" / "train.csv"
    _, state, log = train([pair], config=config, rng=RngStream(5), holdout=[pair], log_path=str(path))
    assert len(state.energy_history[0]) == 1
    saved = pd.read_csv(path)
    assert saved["iter"].tolist() == [1]
    assert np.isfinite(saved["holdout_distortion"][0])


def test_e_steps_do_not_depend_on_the_worker_count(pair):
    params = initial_params()
    models = build_models([pair, pair], params)
    config = PlaneInferenceConfig(rounds=1, n_candidates=4, d_max=14)
    serial = hard_e_steps(models, params, config, RngStream(8), threads=1)
    pooled = hard_e_steps(models, params, config, RngStream(8), threads=2)
    for (planes, energy), (pooled_planes, pooled_energy) in zip(serial, pooled):
        np.testing.assert_array_equal(planes, pooled_planes)
        assert energy == pooled_energy


def test_held_out_planes_are_carried_between_iterations(pair):
    config = TrainConfig(
        iters=2, steps=1, n_samples=1, inference=PlaneInferenceConfig(rounds=1, n_candidates=4, d_max=14)
    )
    _, state, log = train([pair], config=config, rng=RngStream(9), holdout=[pair])
    assert len(state.holdout_latents) == 1
    assert state.holdout_latents[0].shape == (pair.segmentation.n_segments, 3)
    assert log["iter"].tolist() == [1, 2]
    assert np.all(np.isfinite(log["holdout_distortion"]))


def test_training_input_checks(pair):
    with pytest.raises(ConfigError):
        TrainConfig(mode="semi")
    with pytest.raises(DataError):
        train([])
    blind = StereoPair("blind", pair.left, pair.right, None, pair.segmentation)
    with pytest.raises(DataError):
        train([blind], config=TrainConfig(mode="supervised"))
