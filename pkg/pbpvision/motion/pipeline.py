"""
Three-frame structure and motion: planes from the stereo pair at t, velocities
from the left frames at t and t+1, refined by alternation and scored by predicting
the right view at t+1.
"""

import logging
import os
import typing
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import tqdm

from ..errors import ConfigError, DataError, EvaluationError
from ..imaging.image import Image
from ..imaging.segmentation import Segmentation
from ..inference.mcmc import RngStream, as_stream
from ..learning.cd import contrastive_divergence
from ..mde.view import forward_warp
from ..stereo.energy import StereoEnergyParams
from ..stereo.inference import PlaneInferenceConfig, infer_planes
from ..stereo.planes import disparity_from_planes
from .epipole import estimate_epipole
from .kinematics import forward_project, next_disparity, valid_motion
from .matching import sparse_matches
from .velocity import (
    MOTION_GRADIENT_NAMES,
    MotionEnergyModel,
    MotionParams,
    VelocityField,
    solve_velocity,
    sparse_velocity_prior,
)

logger = logging.getLogger(__name__)

ERROR_COLUMNS = ["iteration", "fourth_view_error"]


@dataclass
class FrameQuad:
    """
    Stereo pairs at t and t+1; the right view at t+1 is only used for evaluation.
    """

    left_t: Image
    right_t: Image
    left_t1: Image
    right_t1: Image

    @classmethod
    def from_scene(cls, scene) -> "FrameQuad":
        return cls(scene.left_t, scene.right_t, scene.left_t1, scene.right_t1)


@dataclass
class AlternationResult:
    """
    Attributes:
        planes (np.ndarray): (S, 3) planes at t
        velocities (VelocityField): velocity of every superpixel
        epipole (np.ndarray): focus of expansion used
        error_history (list of float): fourth-view error of the initial estimate, then of
            the retained estimate after every alternation
        matches (np.ndarray): sparse matches between the left frames
    """

    planes: np.ndarray
    velocities: VelocityField
    epipole: np.ndarray
    error_history: typing.List[float] = field(default_factory=list)
    matches: np.ndarray = None


def predict_fourth_view(
    left_t: Image, disparity: np.ndarray, velocity: np.ndarray, epipole
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Warps the left view at t to the left view at t+1 along the epipolar rays, then
    to the right view at t+1 by the disparity at t+1.

    Return:
        (H, W, C) predicted right view at t+1 and the mask of pixels that received a value
    """
    disparity = np.asarray(disparity, dtype=float)
    velocity = np.broadcast_to(np.asarray(velocity, dtype=float), disparity.shape)
    ys, xs = np.indices(disparity.shape, dtype=float)
    moving = valid_motion(disparity, velocity)
    d_safe = np.where(moving, disparity, 0.0)
    v_safe = np.where(moving, velocity, 0.0)
    x1, y1 = forward_project(xs, ys, d_safe, v_safe, epipole)
    d1 = np.where(moving, next_disparity(d_safe, v_safe), np.nan)
    left_t1, _, key = forward_warp(left_t.data, x1, y1, d1)
    target_x = np.where(np.isnan(key), np.nan, xs - np.nan_to_num(key))
    predicted, landed, _ = forward_warp(left_t1, np.nan_to_num(target_x, nan=-1.0), ys, key)
    return predicted, landed


def warp_rms(predicted: np.ndarray, landed: np.ndarray, actual: Image) -> float:
    """Pixel RMS over the pixels that received a value"""
    if not np.any(landed):
        raise EvaluationError("No pixel of the predicted view received a value")
    residual = predicted[landed] - actual.data[landed]
    return float(np.sqrt(np.mean(residual**2)))


def fourth_view_error(
    frames: FrameQuad,
    segmentation: Segmentation,
    planes: np.ndarray,
    velocities,
    epipole,
) -> float:
    """RMS between the predicted and the actual right view at t+1, holes excluded"""
    velocities = velocities.values if isinstance(velocities, VelocityField) else np.asarray(velocities, dtype=float)
    disparity = disparity_from_planes(segmentation, planes)
    predicted, landed = predict_fourth_view(
        frames.left_t, disparity, velocities[segmentation.labels], epipole
    )
    return warp_rms(predicted, landed, frames.right_t1)


def initial_velocities(prior: typing.Mapping[int, float], n_segments: int, params: MotionParams) -> VelocityField:
    """Sparse-match velocities snapped to the label grid, static where a superpixel has no match"""
    grid = params.labels
    values = np.zeros(n_segments)
    for i, v in prior.items():
        if np.isfinite(v):
            values[i] = v
    chosen = np.argmin(np.abs(values[:, None] - grid[None, :]), axis=1)
    return VelocityField(grid[chosen], chosen, grid)


def alternate(
    frames: FrameQuad,
    segmentation: Segmentation,
    stereo_params: StereoEnergyParams = None,
    motion_params: MotionParams = None,
    plane_config: PlaneInferenceConfig = None,
    iters: int = 3,
    rng: RngStream = None,
    epipole=None,
    init_planes: np.ndarray = None,
    progress: bool = False,
) -> AlternationResult:
    """
    Epipole from sparse matches, planes from the stereo pair at t, a sparse
    velocity prior, then `iters` rounds of velocity inference followed by plane
    inference with the motion-match term at the fixed velocities.

    The error history opens with the initial estimate (stereo planes, sparse-match
    velocities) at alternation 0. A round's (planes, velocities) replace the
    retained pair only when they predict the fourth view better, and the next round
    starts from the retained pair, so the history is non-increasing.

    Args:
        frames (FrameQuad): the views
        segmentation (Segmentation): superpixels of the left view at t
        stereo_params (StereoEnergyParams): stereo energy parameters
        motion_params (MotionParams): velocity MRF parameters
        plane_config (PlaneInferenceConfig): plane inference settings
        iters (int): alternations
        rng (RngStream): child 0 drives the first plane inference, child k the k-th re-estimation
        epipole: known focus of expansion, estimated from the matches when None
        init_planes (np.ndarray): planes at t, skipping the first plane inference
    """
    if iters < 1:
        raise ConfigError(f"Need at least one alternation, got {iters}")
    rng = as_stream(rng)
    motion_params = motion_params or MotionParams()

    matches = sparse_matches(frames.left_t, frames.left_t1)
    if epipole is None:
        epipole = estimate_epipole(matches)
        matches = sparse_matches(frames.left_t, frames.left_t1, epipole=epipole)
    epipole = np.asarray(epipole, dtype=float)

    if init_planes is None:
        planes = infer_planes(
            frames.left_t, frames.right_t, segmentation, stereo_params, plane_config, rng.child(0)
        ).planes
    else:
        planes = np.array(init_planes, dtype=float)
    prior = sparse_velocity_prior(matches, segmentation, planes, epipole)
    logger.info(f"Velocity prior from {len(matches)} matches on {len(prior)} superpixels")

    model = MotionEnergyModel(frames.left_t, frames.left_t1, segmentation, epipole, motion_params)
    velocities = initial_velocities(prior, segmentation.n_segments, motion_params)
    best_error = fourth_view_error(frames, segmentation, planes, velocities, epipole)
    history = [best_error]
    logger.info(f"Initial fourth-view error {best_error:.4f}")
    for it in tqdm.tqdm(range(iters), disable=not progress, desc="alternation"):
        candidate_velocities = solve_velocity(
            frames.left_t, frames.left_t1, segmentation, planes, epipole, prior=prior, model=model
        )
        candidate_planes = infer_planes(
            frames.left_t,
            frames.right_t,
            segmentation,
            stereo_params,
            plane_config,
            rng.child(it + 1),
            init=planes,
            extra_unary=model.extra_unary(candidate_velocities.values),
        ).planes
        error = fourth_view_error(frames, segmentation, candidate_planes, candidate_velocities, epipole)
        if error < best_error:
            planes, velocities, best_error = candidate_planes, candidate_velocities, error
        else:
            logger.debug(f"Alternation {it + 1} kept the previous estimate, error {error:.4f}")
        history.append(best_error)
        logger.info(f"Alternation {it + 1}: fourth-view error {best_error:.4f}")
    return AlternationResult(planes, velocities, epipole, history, matches)


def save_errors(history: typing.Sequence[float], path: str) -> pd.DataFrame:
    """Error history as CSV, alternation 0 being the initial estimate"""
    frame = pd.DataFrame({ERROR_COLUMNS[0]: np.arange(len(history)), ERROR_COLUMNS[1]: list(history)})
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    return frame


def metropolis_velocity_sweep(
    model: MotionEnergyModel, planes: np.ndarray, labels: np.ndarray, rng: RngStream, temperature: float = 1.0
) -> np.ndarray:
    """One sweep of ±1 label moves per superpixel under the velocity energy"""
    labels = np.array(labels, dtype=int)
    grid = model.params.labels
    for i in range(len(labels)):
        proposal = labels[i] + (1 if rng.uniform() < 0.5 else -1)
        log_u = np.log(rng.uniform())
        if temperature <= 0 or not 0 <= proposal < len(grid):
            continue
        values = grid[labels]
        costs = model.match_costs(i, planes[i], grid[[labels[i], proposal]])[0]
        for j in model.segmentation.adjacency[i]:
            costs = costs + np.minimum(
                model.params.tau_v, model.params.lambda_v * np.abs(grid[[labels[i], proposal]] - values[j])
            )
        if log_u < -(costs[1] - costs[0]) / temperature:
            labels[i] = proposal
    return labels


def train_motion(
    corpus: typing.Sequence[typing.Tuple[FrameQuad, Segmentation]],
    params: MotionParams = None,
    stereo_params: StereoEnergyParams = None,
    plane_config: PlaneInferenceConfig = None,
    iters: int = 3,
    lr: float = 1e-4,
    steps: int = 8,
    n_samples: int = 10,
    scale: np.ndarray = (1e4, 100.0),
    rng: RngStream = None,
) -> typing.Tuple[MotionParams, typing.List[AlternationResult]]:
    """
    Hard EM over (λ_v, τ_v): one alternation per sequence as the E step, CD ascent
    steps on the smoothness parameters as the M step.
    """
    if not corpus:
        raise DataError("Motion training corpus is empty")
    rng = as_stream(rng)
    params = (params or MotionParams()).copy()
    scale = np.asarray(scale, dtype=float)
    results = []
    for t in range(iters):
        results = [
            alternate(frames, segmentation, stereo_params, params, plane_config, 1, rng.child(t, 0, n))
            for n, (frames, segmentation) in enumerate(corpus)
        ]
        models = [
            MotionEnergyModel(frames.left_t, frames.left_t1, segmentation, result.epipole, params)
            for (frames, segmentation), result in zip(corpus, results)
        ]
        states = [result.velocities.labels for result in results]
        for step in range(steps):
            current = [model.with_params(params) for model in models]

            def gradient(n, labels):
                return current[n].smoothness_gradient(params.labels[labels])

            def mcmc_step(n, labels, stream):
                return metropolis_velocity_sweep(current[n], results[n].planes, labels, stream)

            direction = contrastive_divergence(states, gradient, mcmc_step, rng.child(t, 1, step), n_samples)
            updated = np.maximum(
                np.array([params.lambda_v, params.tau_v]) + lr * scale * direction, 0.0
            )
            params.lambda_v, params.tau_v = (float(value) for value in updated)
        logger.info(
            f"Motion iteration {t + 1}: "
            + ", ".join(f"{name}={getattr(params, name):.4g}" for name in MOTION_GRADIENT_NAMES)
        )
    return params, results
