"""
Monocular depth estimation trained from stereo pairs.

The joint energy of a pair with integer disparity map d is

    λ_d Σ_p min(‖Φ¹(p) - Φ²(p - d(p))‖², τ_d)      data
  + λ_s Σ_(p,q) min(|d(p) - d(q)|, τ_s)              smoothness over 4-neighbors
  + Σ_p (d(p) - w_h(p)·X(p))²                         monocular predictor

where w has one block per height level h. Training alternates a per-level least
squares fit of w with grid BP over d.
"""

import copy
import logging
import typing
from dataclasses import dataclass

import numpy as np
import tqdm

from ..errors import ConfigError, DimensionMismatchError
from ..imaging.features import N_HEIGHT_LEVELS, MonocularFeatures, monocular_features
from ..imaging.image import Image
from ..inference.grid import grid_min_sum
from ..stereo.dense import matching_cost_volume, normalized_features
from .corpus import StereoPair

logger = logging.getLogger(__name__)


@dataclass
class MdeParams:
    """
    Attributes:
        w (np.ndarray or None): (n_levels, D) monocular weights, zero when None
        lambda_d, tau_d (float): data weight and truncation
        lambda_s, tau_s (float): smoothness weight and truncation
        d_max (int): largest disparity label
        n_levels (int): number of height levels
    """

    w: typing.Optional[np.ndarray] = None
    lambda_d: float = 1.0
    tau_d: float = 6.0
    lambda_s: float = 0.5
    tau_s: float = 4.0
    d_max: int = 16
    n_levels: int = N_HEIGHT_LEVELS

    def __post_init__(self):
        for name in ("lambda_d", "tau_d", "lambda_s", "tau_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.d_max < 0:
            raise ConfigError("d_max must be non-negative")

    def copy(self) -> "MdeParams":
        return copy.deepcopy(self)

    def weights(self, dimension: int) -> np.ndarray:
        if self.w is None:
            return np.zeros((self.n_levels, dimension))
        if self.w.shape != (self.n_levels, dimension):
            raise DimensionMismatchError(
                f"Weights of shape {self.w.shape} do not fit {self.n_levels} levels of {dimension} features"
            )
        return self.w


@dataclass
class MdeEnergy:
    data: float
    smooth: float
    mono: float

    @property
    def total(self) -> float:
        return self.data + self.smooth + self.mono


def mono_prediction(features: MonocularFeatures, w: np.ndarray) -> np.ndarray:
    """w_h(p)·X(p) for every pixel"""
    return np.einsum("hwd,hwd->hw", features.features, w[features.height_level])


def mono_cost_volume(prediction: np.ndarray, d_max: int) -> np.ndarray:
    labels = np.arange(d_max + 1, dtype=float)
    return (labels[None, None, :] - prediction[..., None]) ** 2


def data_cost_volume(pair: StereoPair, params: MdeParams) -> np.ndarray:
    volume = matching_cost_volume(
        normalized_features(pair.left),
        normalized_features(pair.right),
        params.d_max,
        truncation=params.tau_d,
    )
    return params.lambda_d * volume


def _smooth(d: np.ndarray, params: MdeParams) -> float:
    total = 0.0
    for diff in (np.diff(d, axis=0), np.diff(d, axis=1)):
        total += float(np.sum(np.minimum(np.abs(diff), params.tau_s)))
    return params.lambda_s * total


def mde_energy(
    pair: StereoPair,
    d: np.ndarray,
    params: MdeParams,
    features: MonocularFeatures = None,
    data_cost: np.ndarray = None,
) -> MdeEnergy:
    """Data, smoothness and monocular terms of an integer disparity map"""
    d = np.asarray(d)
    labels = np.rint(d).astype(int)
    if labels.shape != tuple(pair.left.shape):
        raise DimensionMismatchError(f"Disparity {labels.shape} does not match image {pair.left.shape}")
    if features is None:
        features = monocular_features(pair.left, params.n_levels)
    if data_cost is None:
        data_cost = data_cost_volume(pair, params)
    rows, cols = np.indices(labels.shape)
    data = float(np.sum(data_cost[rows, cols, np.clip(labels, 0, params.d_max)]))
    prediction = mono_prediction(features, params.weights(features.dimension))
    mono = float(np.sum((d - prediction) ** 2))
    return MdeEnergy(data, _smooth(d, params), mono)


def _solve(cost: np.ndarray, params: MdeParams) -> np.ndarray:
    solution = grid_min_sum(cost, params.lambda_s, params.lambda_s * params.tau_s)
    return solution.labels


def monocular_infer(
    image: Image, params: MdeParams, features: MonocularFeatures = None
) -> np.ndarray:
    """Integer disparities 0..d_max minimizing the monocular plus smoothness terms"""
    if features is None:
        features = monocular_features(image, params.n_levels)
    prediction = mono_prediction(features, params.weights(features.dimension))
    return _solve(mono_cost_volume(prediction, params.d_max), params)


def infer_disparity(
    pair: StereoPair,
    params: MdeParams,
    use_stereo: bool = True,
    use_mono: bool = True,
    features: MonocularFeatures = None,
    data_cost: np.ndarray = None,
) -> np.ndarray:
    """
    Grid BP on any combination of the data and monocular terms, always with the
    smoothness term.
    """
    if not (use_stereo or use_mono):
        raise ConfigError("At least one of the stereo and monocular terms is needed")
    height, width = pair.left.shape
    cost = np.zeros((height, width, params.d_max + 1))
    if use_stereo:
        cost += data_cost_volume(pair, params) if data_cost is None else data_cost
    if use_mono:
        if features is None:
            features = monocular_features(pair.left, params.n_levels)
        prediction = mono_prediction(features, params.weights(features.dimension))
        cost += mono_cost_volume(prediction, params.d_max)
    return _solve(cost, params)


def fit_mono_weights(
    features: typing.Sequence[MonocularFeatures],
    disparities: typing.Sequence[np.ndarray],
    n_levels: int = N_HEIGHT_LEVELS,
    ridge: float = 1e-6,
) -> np.ndarray:
    """
    Per height level, least squares of d(p) on X(p) over every pixel of the corpus at
    that level. Rank-deficient levels fall back to ridge regression.

    Return:
        (n_levels, D) weights
    """
    dimension = features[0].dimension
    w = np.zeros((n_levels, dimension))
    deficient = []
    for level in range(n_levels):
        rows = [f.features[f.height_level == level] for f in features]
        targets = [np.asarray(d, dtype=float)[f.height_level == level] for f, d in zip(features, disparities)]
        design = np.concatenate(rows, axis=0)
        target = np.concatenate(targets)
        if len(target) == 0:
            continue
        solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < dimension:
            deficient.append(level)
            gram = design.T @ design + ridge * np.eye(dimension)
            solution = np.linalg.solve(gram, design.T @ target)
        w[level] = solution
    if deficient:
        logger.warning(
            f"{len(deficient)} height levels are rank deficient, using ridge {ridge} for them"
        )
    return w


def bootstrap_em(
    corpus: typing.Sequence[StereoPair],
    params: MdeParams = None,
    iters: int = 3,
    progress: bool = False,
) -> typing.Tuple[MdeParams, typing.List[float]]:
    """
    Coordinate descent on the summed joint energy: disparities start from the data
    and smoothness terms only, then w is refit by per-level least squares and the
    disparities are re-inferred on the full energy, keeping the previous map of a
    pair if BP returns a higher energy.

    Return:
        trained parameters and the objective after every half-step
    """
    params = (params or MdeParams()).copy()
    if iters <= 0:
        return params, []
    features = [monocular_features(pair.left, params.n_levels) for pair in corpus]
    data_costs = [data_cost_volume(pair, params) for pair in corpus]
    disparities = [
        infer_disparity(pair, params, use_mono=False, data_cost=cost)
        for pair, cost in zip(corpus, data_costs)
    ]

    def objective() -> float:
        return sum(
            mde_energy(pair, d, params, f, cost).total
            for pair, d, f, cost in zip(corpus, disparities, features, data_costs)
        )

    history = []
    for it in tqdm.tqdm(range(iters), disable=not progress, desc="bootstrap"):
        params.w = fit_mono_weights(features, disparities, params.n_levels)
        history.append(objective())
        for n, pair in enumerate(corpus):
            candidate = infer_disparity(pair, params, features=features[n], data_cost=data_costs[n])
            new = mde_energy(pair, candidate, params, features[n], data_costs[n]).total
            old = mde_energy(pair, disparities[n], params, features[n], data_costs[n]).total
            if new <= old:
                disparities[n] = candidate
        history.append(objective())
        logger.info(f"Bootstrap iteration {it + 1}: objective {history[-1]:.3f}")
    return params, history
