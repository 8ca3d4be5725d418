"""
Hard conditional EM over a stereo corpus.

The E step infers the planes Z_i of every pair under the current parameters. The M
step then solves the match weights λ_k and the texture predictors β_A, β_B in
closed form, and moves (λ_S, τ_S, λ_A, λ_B) along the contrastive divergence
direction for a fixed number of steps.
"""

import logging
import os
import typing
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
import pandas as pd
import tqdm
import wandb

from ..errors import ConfigError, DataError
from ..imaging.segmentation import Segmentation, fh_segment
from ..inference.mcmc import RngStream, as_stream
from ..mde.corpus import StereoPair
from ..mde.view import view_prediction_error
from ..stereo.energy import StereoEnergyModel, StereoEnergyParams
from ..stereo.inference import PlaneInferenceConfig, PlaneInferenceResult, infer_planes
from ..stereo.planes import disparity_from_planes, fit_plane_lstsq, robust_superpixel_plane
from .cd import PLANE_SIGMA, cd_gradient
from .params import BLOCK_SCALE, initial_params

logger = logging.getLogger(__name__)

OPTIONS_MODES = ["unsupervised", "supervised"]
LOG_COLUMNS = ["iter", "mean_energy", "holdout_distortion"]


@dataclass
class TrainConfig:
    """
    Attributes:
        iters (int): hard EM iterations
        lr (float): constant learning rate of the CD steps
        steps (int): CD steps per M step
        n_samples (int): perturbed assignments per pair in the CD expectation
        mcmc_steps (int): Metropolis sweeps per perturbed assignment
        texture (bool): train the texture term, frozen at zero otherwise
        regress (bool): solve λ_k and β_A, β_B in closed form
        ridge (float): ridge used when the regression is rank deficient
        mode (str): "unsupervised" or "supervised"
        inference (PlaneInferenceConfig): settings of the E step
    """

    iters: int = 6
    lr: float = 1e-3
    steps: int = 8
    n_samples: int = 10
    mcmc_steps: int = 1
    texture: bool = True
    regress: bool = True
    ridge: float = 1e-6
    mode: str = "unsupervised"
    inference: PlaneInferenceConfig = field(default_factory=PlaneInferenceConfig)

    def __post_init__(self):
        if self.mode not in OPTIONS_MODES:
            raise ConfigError(f"Unknown training mode {self.mode}")
        if self.lr < 0 or self.steps < 0 or self.n_samples < 1 or self.mcmc_steps < 1:
            raise ConfigError("lr and steps must be non-negative, n_samples and mcmc_steps positive")


@dataclass
class TrainState:
    """
    Attributes:
        params (StereoEnergyParams): current parameters
        latents (list of np.ndarray): (S_i, 3) planes of every pair
        iteration (int): completed hard EM iterations
        energy_history (list of list of float): per pair, total energy after every E step
        holdout_latents (list of np.ndarray): (S_j, 3) planes of every held-out pair
    """

    params: StereoEnergyParams
    latents: typing.List[np.ndarray] = field(default_factory=list)
    iteration: int = 0
    energy_history: typing.List[typing.List[float]] = field(default_factory=list)
    holdout_latents: typing.List[np.ndarray] = field(default_factory=list)


def pair_segmentation(pair: StereoPair) -> Segmentation:
    if pair.segmentation is not None:
        return pair.segmentation
    return fh_segment(pair.left)


def build_models(
    corpus: typing.Sequence[StereoPair], params: StereoEnergyParams
) -> typing.List[StereoEnergyModel]:
    return [
        StereoEnergyModel(pair.left, pair.right, pair_segmentation(pair), params) for pair in corpus
    ]


def ridge_lstsq(design: np.ndarray, target: np.ndarray, ridge: float = 1e-6, what: str = "") -> np.ndarray:
    """Least squares, with ridge regularization when the design is rank deficient"""
    solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        logger.warning(f"Rank deficient regression {what}, using ridge {ridge}")
        gram = design.T @ design + ridge * np.eye(design.shape[1])
        solution = np.linalg.solve(gram, design.T @ target)
    return solution


def closed_form_match_weights(residuals: np.ndarray, current: np.ndarray) -> np.ndarray:
    """
    λ_k = N / (2 Σ r_k²), the minimizer of Σ_k (λ_k Σ r_k² - N/2 ln λ_k). Features
    without residual energy keep their current weight.
    """
    residuals = np.asarray(residuals, dtype=float)
    squares = np.sum(residuals**2, axis=0)
    weights = np.array(current, dtype=float)
    fitted = squares > 0
    weights[fitted] = residuals.shape[0] / (2.0 * squares[fitted])
    return np.maximum(weights, 0.0)


def match_weight_loss(residuals: np.ndarray, weights: np.ndarray) -> float:
    """Negative log-likelihood of the residuals under per-feature Gaussians"""
    squares = np.sum(np.asarray(residuals, dtype=float) ** 2, axis=0)
    n = residuals.shape[0]
    return float(np.sum(weights * squares - 0.5 * n * np.log(weights)))


def fit_texture_predictors(
    models: typing.Sequence[StereoEnergyModel],
    latents: typing.Sequence[np.ndarray],
    ridge: float = 1e-6,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """β_A, β_B regressing A_i(p)/d(p) and B_i(p)/d(p) on H(p) over the corpus"""
    rows, slopes_a, slopes_b = [], [], []
    for model, planes in zip(models, latents):
        hog, a, b = model.texture_regression_data(planes)
        rows.append(hog)
        slopes_a.append(a)
        slopes_b.append(b)
    design = np.concatenate(rows, axis=0)
    if design.shape[0] == 0:
        raise DataError("No pixel with positive disparity to fit the texture predictors")
    return (
        ridge_lstsq(design, np.concatenate(slopes_a), ridge, "for β_A"),
        ridge_lstsq(design, np.concatenate(slopes_b), ridge, "for β_B"),
    )


def hard_e_step(
    model: StereoEnergyModel,
    params: StereoEnergyParams,
    config: PlaneInferenceConfig = None,
    rng: RngStream = None,
    init: np.ndarray = None,
) -> PlaneInferenceResult:
    """Planes of one pair minimizing its energy under `params`, warm-started from `init`"""
    return infer_planes(
        model.left, model.right, model.segmentation, params, config, rng, init=init, model=model
    )


def _e_step_task(task) -> typing.Tuple[np.ndarray, float]:
    model, params, config, seed, key, init = task
    result = hard_e_step(model, params, config, RngStream(seed, key), init)
    return result.planes, result.energy


def hard_e_steps(
    models: typing.Sequence[StereoEnergyModel],
    params: StereoEnergyParams,
    config: PlaneInferenceConfig = None,
    rng: RngStream = None,
    latents: typing.Sequence[typing.Optional[np.ndarray]] = None,
    threads: int = 1,
) -> typing.List[typing.Tuple[np.ndarray, float]]:
    """
    Hard E step of every pair. Pair n draws from rng.child(n) and warm-starts from
    latents[n], so the result does not depend on `threads`.

    Return:
        (planes, energy) of every pair
    """
    rng = as_stream(rng)
    latents = [None] * len(models) if latents is None else latents
    tasks = []
    for n, (model, init) in enumerate(zip(models, latents)):
        stream = rng.child(n)
        tasks.append((model, params, config, stream.seed_value, stream.key, init))
    if threads > 1 and len(tasks) > 1:
        with Pool(min(threads, len(tasks))) as pool:
            return pool.map(_e_step_task, tasks)
    return [_e_step_task(task) for task in tasks]


def m_step(
    models: typing.Sequence[StereoEnergyModel],
    latents: typing.Sequence[np.ndarray],
    params: StereoEnergyParams,
    config: TrainConfig = None,
    rng: RngStream = None,
) -> StereoEnergyParams:
    """
    Closed-form match weights and texture predictors, then `config.steps` projected
    ascent steps of (λ_S, τ_S, λ_A, λ_B) along the CD direction.

    κ_border and τ_T are held fixed: the out-of-bounds charge and the texture cap
    keep the values they come in with.
    """
    config = config or TrainConfig()
    rng = as_stream(rng)
    params = params.copy()
    if config.regress:
        residuals = np.concatenate(
            [model.match_residuals(planes) for model, planes in zip(models, latents)], axis=0
        )
        params.match_weights = closed_form_match_weights(residuals, params.match_weights)
        if config.texture:
            params.beta_a, params.beta_b = fit_texture_predictors(models, latents, config.ridge)

    for step in range(config.steps):
        current = [model.with_params(params) for model in models]
        gradient = cd_gradient(
            current,
            latents,
            rng.child(step),
            config.n_samples,
            config.mcmc_steps,
            PLANE_SIGMA,
        )
        if not config.texture:
            gradient[2:] = 0.0
        params = params.with_beta_y(params.beta_y + config.lr * BLOCK_SCALE * gradient)
        logger.debug(f"CD step {step + 1}: gradient {np.round(gradient, 3).tolist()}")

    if not config.texture:
        params.lambda_a = 0.0
        params.lambda_b = 0.0
    return params


def supervised_latents(model: StereoEnergyModel, disparity: np.ndarray, rng: RngStream = None) -> np.ndarray:
    """One least-squares plane per superpixel on the ground-truth disparities"""
    rng = as_stream(rng)
    disparity = np.asarray(disparity, dtype=float)
    planes = np.zeros((model.n_segments, 3))
    for i in range(model.n_segments):
        ys, xs = model.segmentation.pixels(i)
        valid = np.isfinite(disparity[ys, xs])
        if np.all(valid) and len(xs) >= 3:
            try:
                planes[i] = fit_plane_lstsq(xs, ys, disparity[ys, xs])
                continue
            except DataError:
                pass
        planes[i] = robust_superpixel_plane(xs, ys, disparity[ys, xs], valid, rng=rng.child(i))
    return planes


def planes_distortion(
    models: typing.Sequence[StereoEnergyModel], latents: typing.Sequence[np.ndarray]
) -> float:
    """Mean view-prediction distortion of the plane disparities of every pair"""
    errors = []
    for model, planes in zip(models, latents):
        d = disparity_from_planes(model.segmentation, planes)
        errors.append(view_prediction_error(model.left, model.right, d))
    return float(np.mean(errors))


def heldout_distortion(
    corpus: typing.Sequence[StereoPair],
    params: StereoEnergyParams,
    config: PlaneInferenceConfig = None,
    rng: RngStream = None,
    threads: int = 1,
) -> float:
    """Mean view-prediction distortion of the planes inferred from scratch on held-out pairs"""
    models = build_models(corpus, params)
    results = hard_e_steps(models, params, config, rng, None, threads)
    return planes_distortion(models, [planes for planes, _ in results])


def _wandb_config(config: TrainConfig) -> dict:
    return {
        "iters": config.iters,
        "lr": config.lr,
        "steps": config.steps,
        "n_samples": config.n_samples,
        "mcmc_steps": config.mcmc_steps,
        "texture": config.texture,
        "mode": config.mode,
    }


def train(
    corpus: typing.Sequence[StereoPair],
    params: StereoEnergyParams = None,
    config: TrainConfig = None,
    rng: RngStream = None,
    holdout: typing.Sequence[StereoPair] = (),
    log_path: str = None,
    use_wandb: bool = False,
    progress: bool = False,
    threads: int = 1,
) -> typing.Tuple[StereoEnergyParams, TrainState, pd.DataFrame]:
    """
    Alternate hard E steps over the corpus and M steps.

    Iteration t uses rng.child(t, 0, n) for the E step of pair n, rng.child(t, 1)
    for the M step and rng.child(t, 2, n) for the E step of held-out pair n. Held-out
    pairs never enter the M step; their planes are warm-started from one iteration
    to the next like the training latents, and the log scores them by
    view-prediction distortion.

    Args:
        corpus (list of StereoPair): training pairs
        params (StereoEnergyParams): starting parameters, the heuristic defaults if None
        config (TrainConfig): training settings
        rng (RngStream): random stream
        holdout (list of StereoPair): pairs scored by view-prediction distortion
        log_path (str): CSV destination of the per-iteration log
        use_wandb (bool): mirror the log to Weights & Biases
        threads (int): worker processes of the E steps

    Return:
        trained parameters, final state and the training log
    """
    config = config or TrainConfig()
    rng = as_stream(rng)
    if not corpus:
        raise DataError("Training corpus is empty")
    params = (params or initial_params(config.texture)).copy()
    if not config.texture:
        params.lambda_a = 0.0
        params.lambda_b = 0.0
    models = build_models(corpus, params)
    holdout_models = build_models(holdout, params)
    state = TrainState(
        params, [None] * len(corpus), 0, [[] for _ in corpus], [None] * len(holdout_models)
    )

    run = None
    if use_wandb:
        run = wandb.init(project="pbpvision", config=_wandb_config(config), dir="./tmp/wandb")

    rows = []
    if config.mode == "supervised":
        missing = [pair.name for pair in corpus if pair.disparity is None]
        if missing:
            raise DataError(f"Supervised training needs ground truth, missing for {missing}")
        state.latents = [
            supervised_latents(model, pair.disparity, rng.child(0, 0, n))
            for n, (model, pair) in enumerate(zip(models, corpus))
        ]
        state.params = m_step(models, state.latents, params, config, rng.child(0, 1))
        state.iteration = 1
        rows.append(_log_row(state, models, holdout_models, config, rng.child(0, 2), threads))
    else:
        for t in tqdm.tqdm(range(config.iters), disable=not progress, desc="hard EM"):
            results = hard_e_steps(
                models, state.params, config.inference, rng.child(t, 0), state.latents, threads
            )
            for n, (planes, energy) in enumerate(results):
                state.latents[n] = planes
                state.energy_history[n].append(energy)
            state.params = m_step(models, state.latents, state.params, config, rng.child(t, 1))
            state.iteration = t + 1
            rows.append(_log_row(state, models, holdout_models, config, rng.child(t, 2), threads))
            logger.info(
                f"Iteration {t + 1}: mean energy {rows[-1]['mean_energy']:.3f}, "
                f"held-out distortion {rows[-1]['holdout_distortion']:.4f}"
            )
            if run is not None:
                wandb.log(rows[-1])

    log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    if log_path is not None:
        directory = os.path.dirname(log_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        log.to_csv(log_path, index=False)
    if run is not None:
        run.finish()
    return state.params, state, log


def _log_row(state, models, holdout_models, config, rng, threads) -> dict:
    energies = [
        model.with_params(state.params).total_energy(planes)
        for model, planes in zip(models, state.latents)
    ]
    distortion = np.nan
    if holdout_models:
        results = hard_e_steps(
            holdout_models, state.params, config.inference, rng, state.holdout_latents, threads
        )
        state.holdout_latents = [planes for planes, _ in results]
        distortion = planes_distortion(holdout_models, state.holdout_latents)
    return {
        "iter": state.iteration,
        "mean_energy": float(np.mean(energies)),
        "holdout_distortion": distortion,
    }
