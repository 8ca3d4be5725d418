"""
Velocity MRF over superpixels.

Each superpixel takes one velocity label v. Its data cost compares the features of
its pixels at t with the features at t+1 where they move under (d, v):

    Σ_p Σ_k λ_k (φ_k^t(p) - φ_k^{t+1}(p'))²,   p' = e + (p - e) / (1 - d(p) v)

with bilinear lookup, κ_border for p' outside the frame and an infinite cost when
1 - d v <= 0 for any pixel. Neighbors pay min(τ_v, λ_v |v_P - v_Q|).
"""

import copy
import logging
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import ConfigError, DataError, DimensionMismatchError
from ..imaging.features import N_PIXEL_FEATURES
from ..imaging.image import Image
from ..imaging.segmentation import Segmentation
from ..inference.bp import map_indices
from ..inference.graph import Domain, FactorGraph, table_pairwise, table_unary
from ..stereo.dense import DATA_TRUNCATION, normalized_features
from ..stereo.planes import disparity_from_planes, plane_disparity
from .kinematics import depth_change, velocity_from_ratio

logger = logging.getLogger(__name__)

MOTION_GRADIENT_NAMES = ("lambda_v", "tau_v")


@dataclass
class MotionParams:
    """
    Attributes:
        match_weights (np.ndarray): 9 motion-match weights λ_k
        kappa_border (float): cost of a pixel leaving the frame
        lambda_v, tau_v (float): velocity smoothness weight and truncation
        n_labels (int): number of velocity labels
        d_max (int): largest disparity, sets the default label range
        v_max (float or None): largest |v|, 0.8 / d_max when None
        prior_weight (float): weight of the sparse-match prior, per label step
        focal, baseline (float or None): camera constants for reporting Δz
        schedule (str): BP schedule
        bp_iters (int): max-product rounds
    """

    match_weights: np.ndarray = field(default_factory=lambda: np.ones(N_PIXEL_FEATURES))
    kappa_border: float = DATA_TRUNCATION
    lambda_v: float = 2000.0
    tau_v: float = 20.0
    n_labels: int = 64
    d_max: int = 16
    v_max: typing.Optional[float] = None
    prior_weight: float = 1.0
    focal: typing.Optional[float] = None
    baseline: typing.Optional[float] = None
    schedule: str = "synchronous"
    bp_iters: int = 50

    def __post_init__(self):
        self.match_weights = np.asarray(self.match_weights, dtype=float)
        if self.match_weights.shape != (N_PIXEL_FEATURES,) or np.any(self.match_weights < 0):
            raise ConfigError(f"Expected {N_PIXEL_FEATURES} non-negative motion-match weights")
        for name in ("kappa_border", "lambda_v", "tau_v", "prior_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.n_labels < 2 or self.d_max <= 0:
            raise ConfigError("Need at least 2 velocity labels and a positive d_max")
        if self.v_max is not None and self.v_max <= 0:
            raise ConfigError("v_max must be positive")

    def copy(self) -> "MotionParams":
        return copy.deepcopy(self)

    @property
    def step(self) -> float:
        v_max = self.v_max if self.v_max is not None else 0.8 / self.d_max
        return v_max / (self.n_labels // 2)

    @property
    def labels(self) -> np.ndarray:
        """Uniform velocity grid including 0, from -(n/2 - 1) to n/2 steps"""
        half = self.n_labels // 2
        return self.step * np.arange(-half + 1, self.n_labels - half + 1)


@dataclass
class VelocityField:
    """
    Attributes:
        values (np.ndarray): (S,) velocity of every superpixel
        labels (np.ndarray): (S,) label index of every superpixel
        label_values (np.ndarray): the velocity grid
        depth_change (np.ndarray or None): (S,) Δz when focal length and baseline are known
    """

    values: np.ndarray
    labels: np.ndarray
    label_values: np.ndarray
    depth_change: typing.Optional[np.ndarray] = None

    def per_pixel(self, segmentation: Segmentation) -> np.ndarray:
        return self.values[segmentation.labels]


def sample_bilinear(features: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Bilinear lookup of (H, W, C) features at real positions of any shape.

    Return:
        values of shape xs.shape + (C,) and the in-frame mask
    """
    height, width, channels = features.shape
    inside = (xs >= 0) & (xs <= width - 1) & (ys >= 0) & (ys <= height - 1)
    coordinates = np.stack([np.clip(ys, 0, height - 1), np.clip(xs, 0, width - 1)])
    values = np.stack(
        [ndimage.map_coordinates(features[..., k], coordinates, order=1) for k in range(channels)],
        axis=-1,
    )
    return values, inside


class MotionEnergyModel:
    """
    Features of two consecutive left frames and the superpixels of frame t.

    Attributes:
        features_t, features_t1 (np.ndarray): (H, W, 9) Φ grids
        segmentation (Segmentation): superpixels of frame t
        epipole (np.ndarray): focus of expansion
        params (MotionParams): motion parameters
    """

    def __init__(
        self,
        frame_t: Image,
        frame_t1: Image,
        segmentation: Segmentation,
        epipole,
        params: MotionParams = None,
    ):
        if frame_t.shape != frame_t1.shape:
            raise DimensionMismatchError(f"Frames differ in size: {frame_t.shape} vs {frame_t1.shape}")
        if tuple(segmentation.shape) != tuple(frame_t.shape):
            raise DimensionMismatchError("Segmentation does not match the frames")
        self.features_t = normalized_features(frame_t)
        self.features_t1 = normalized_features(frame_t1)
        self.segmentation = segmentation
        self.epipole = np.asarray(epipole, dtype=float)
        self.params = params or MotionParams()
        self._pixels = [segmentation.pixels(i) for i in range(segmentation.n_segments)]

    @property
    def n_segments(self) -> int:
        return self.segmentation.n_segments

    def with_params(self, params: MotionParams) -> "MotionEnergyModel":
        model = copy.copy(self)
        model.params = params
        return model

    def match_costs(self, i: int, planes: np.ndarray, velocities) -> np.ndarray:
        """(K, L) motion-match cost of superpixel i for K planes and L velocities"""
        planes = np.atleast_2d(planes)
        velocities = np.atleast_1d(np.asarray(velocities, dtype=float))
        ys, xs = self._pixels[i]
        d = plane_disparity(planes[:, None, :], xs[None, :], ys[None, :])
        scale = 1.0 - d[:, None, :] * velocities[None, :, None]
        valid = scale > 0
        safe = np.where(valid, scale, 1.0)
        ex, ey = self.epipole
        values, inside = sample_bilinear(self.features_t1, ex + (xs - ex) / safe, ey + (ys - ey) / safe)
        residual = self.features_t[ys, xs] - values
        cost = np.where(inside, residual**2 @ self.params.match_weights, self.params.kappa_border)
        return np.where(valid.all(axis=2), cost.sum(axis=2), np.inf)

    def velocity_costs(self, i: int, plane: np.ndarray) -> np.ndarray:
        return self.match_costs(i, plane, self.params.labels)[0]

    def smoothness_table(self) -> np.ndarray:
        labels = self.params.labels
        gaps = np.abs(labels[:, None] - labels[None, :])
        return np.minimum(self.params.tau_v, self.params.lambda_v * gaps)

    def match_energy(self, planes: np.ndarray, velocities: np.ndarray) -> float:
        return float(
            sum(self.match_costs(i, planes[i], velocities[i])[0, 0] for i in range(self.n_segments))
        )

    def smoothness_energy(self, velocities: np.ndarray) -> float:
        total = 0.0
        for i, j in self.segmentation.edges:
            total += min(self.params.tau_v, self.params.lambda_v * abs(velocities[i] - velocities[j]))
        return total

    def energy(self, planes: np.ndarray, velocities: np.ndarray) -> float:
        return self.match_energy(planes, velocities) + self.smoothness_energy(velocities)

    def smoothness_gradient(self, velocities: np.ndarray) -> np.ndarray:
        """Derivative of the smoothness energy with respect to (λ_v, τ_v)"""
        gradient = np.zeros(len(MOTION_GRADIENT_NAMES))
        for i, j in self.segmentation.edges:
            gap = abs(velocities[i] - velocities[j])
            if self.params.lambda_v * gap < self.params.tau_v:
                gradient[0] += gap
            else:
                gradient[1] += 1.0
        return gradient

    def extra_unary(self, velocities: np.ndarray):
        """Motion-match cost at fixed velocities, as an additional plane unary"""
        velocities = np.asarray(velocities, dtype=float)

        def unary(i, planes):
            return self.match_costs(i, planes, velocities[i])[:, 0]

        return unary


def sparse_velocity_prior(
    matches: np.ndarray,
    segmentation: Segmentation,
    planes: np.ndarray,
    epipole,
    min_radius: float = 3.0,
    min_disparity: float = 0.5,
) -> typing.Dict[int, float]:
    """
    Velocity implied by every sparse match through r_{t+1} / r_t = 1 / (1 - d v),
    summarized by the median per superpixel.
    """
    matches = np.asarray(matches, dtype=float).reshape(-1, 4)
    if len(matches) == 0:
        return {}
    ex, ey = epipole
    d = disparity_from_planes(segmentation, planes)
    height, width = segmentation.shape
    x0 = np.clip(np.rint(matches[:, 0]).astype(int), 0, width - 1)
    y0 = np.clip(np.rint(matches[:, 1]).astype(int), 0, height - 1)
    r0 = np.hypot(matches[:, 0] - ex, matches[:, 1] - ey)
    r1 = np.hypot(matches[:, 2] - ex, matches[:, 3] - ey)
    disparity = d[y0, x0]
    usable = (r0 >= min_radius) & (r1 > 0) & (disparity > min_disparity)
    estimates = {}
    owners = segmentation.labels[y0, x0]
    with np.errstate(divide="ignore", invalid="ignore"):
        velocities = velocity_from_ratio(disparity, r1 / r0)
    for i in np.unique(owners[usable]):
        estimates[int(i)] = float(np.median(velocities[usable & (owners == i)]))
    return estimates


def solve_velocity(
    frame_t: Image,
    frame_t1: Image,
    segmentation: Segmentation,
    planes: np.ndarray,
    epipole,
    params: MotionParams = None,
    prior: typing.Mapping[int, float] = None,
    model: MotionEnergyModel = None,
) -> VelocityField:
    """
    One velocity label per superpixel by max-product BP on the velocity MRF, with
    the sparse-match prior prior_weight |v - v̂| / step added where available.
    """
    if model is None:
        model = MotionEnergyModel(frame_t, frame_t1, segmentation, epipole, params)
    elif params is not None:
        model = model.with_params(params)
    params = model.params
    planes = np.asarray(planes, dtype=float)
    if planes.shape != (segmentation.n_segments, 3):
        raise DataError(f"Expected {segmentation.n_segments} planes, got {planes.shape}")
    labels = params.labels
    prior = prior or {}

    graph = FactorGraph()
    for i in range(segmentation.n_segments):
        cost = model.velocity_costs(i, planes[i])
        if i in prior:
            cost = cost + params.prior_weight * np.abs(labels - prior[i]) / params.step
        graph.add_variable(Domain.discrete(len(labels)), table_unary(-cost))
    smoothness = -model.smoothness_table()
    for i, j in segmentation.edges:
        graph.add_edge(i, j, table_pairwise(smoothness))
    chosen = np.asarray(map_indices(graph, schedule=params.schedule, max_iters=params.bp_iters), dtype=int)

    values = labels[chosen]
    dz = None
    if params.focal is not None and params.baseline is not None:
        dz = depth_change(values, params.focal, params.baseline)
    logger.debug(f"Velocities in [{values.min():.4f}, {values.max():.4f}]")
    return VelocityField(values, chosen, labels, dz)
