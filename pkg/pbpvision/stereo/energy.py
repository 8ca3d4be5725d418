"""
The slanted-plane energy E(Z) = E_M + E_S + E_T over one plane per superpixel.

E_M  match: Σ_p Σ_k λ_k (Φ^L_k(p) - Φ^R_k(p - d(p)))², κ_border per out-of-bounds p
E_S  smoothness: Σ over adjacent superpixel pairs of min(τ_S, λ_S Σ_{(p,q)∈B_ij} |d(p) - d(q)|)
E_T  texture: Σ_p min(τ_T, λ_A (d(p) β_A·H(p) - A_i(p))² + λ_B (d(p) β_B·H(p) - B_i(p))²)
"""

import copy
import logging
import typing
from dataclasses import dataclass, field, fields

import numpy as np

from ..errors import ConfigError, DataError, DimensionMismatchError
from ..imaging.features import N_PIXEL_FEATURES
from ..imaging.hog import HOG_DIMENSION, hog_pyramid
from ..imaging.image import Image
from ..imaging.segmentation import Segmentation
from .dense import DATA_TRUNCATION, normalized_features, sample_columns
from .planes import plane_disparity

logger = logging.getLogger(__name__)

# Parameters trained by contrastive divergence, in gradient order
BETA_Y_NAMES = ("lambda_s", "tau_s", "lambda_a", "lambda_b")

# extra_unary(i, planes (K, 3)) -> (K,) additional energy of superpixel i
ExtraUnary = typing.Callable[[int, np.ndarray], np.ndarray]


@dataclass
class StereoEnergyParams:
    """
    Match block: 9 λ_k and κ_border. Smoothness block: λ_S, τ_S. Texture block:
    λ_A, λ_B, β_A, β_B, with τ_T held fixed.
    """

    match_weights: np.ndarray = field(default_factory=lambda: np.ones(N_PIXEL_FEATURES))
    kappa_border: float = DATA_TRUNCATION
    lambda_s: float = 2.0
    tau_s: float = 200.0
    lambda_a: float = 0.5
    lambda_b: float = 0.5
    tau_t: float = 4.0
    beta_a: np.ndarray = field(default_factory=lambda: np.zeros(HOG_DIMENSION))
    beta_b: np.ndarray = field(default_factory=lambda: np.zeros(HOG_DIMENSION))

    def __post_init__(self):
        self.match_weights = np.asarray(self.match_weights, dtype=float)
        self.beta_a = np.asarray(self.beta_a, dtype=float)
        self.beta_b = np.asarray(self.beta_b, dtype=float)
        if self.match_weights.shape != (N_PIXEL_FEATURES,):
            raise ConfigError(f"Expected {N_PIXEL_FEATURES} match weights")
        if self.beta_a.shape != (HOG_DIMENSION,) or self.beta_b.shape != (HOG_DIMENSION,):
            raise ConfigError(f"Texture predictors must have {HOG_DIMENSION} entries")
        for name in ("kappa_border",) + BETA_Y_NAMES + ("tau_t",):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if np.any(self.match_weights < 0):
            raise ConfigError("Match weights must be non-negative")

    @classmethod
    def zeros(cls) -> "StereoEnergyParams":
        return cls(
            match_weights=np.zeros(N_PIXEL_FEATURES),
            kappa_border=0.0,
            lambda_s=0.0,
            tau_s=0.0,
            lambda_a=0.0,
            lambda_b=0.0,
            tau_t=0.0,
        )

    def copy(self) -> "StereoEnergyParams":
        return copy.deepcopy(self)

    @property
    def beta_y(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in BETA_Y_NAMES])

    def with_beta_y(self, values) -> "StereoEnergyParams":
        """Copy with the CD-trained block replaced, clamped at zero"""
        params = self.copy()
        for name, value in zip(BETA_Y_NAMES, np.maximum(np.asarray(values, dtype=float), 0.0)):
            setattr(params, name, float(value))
        return params

    def to_dict(self) -> dict:
        result = {}
        for f in fields(self):
            value = getattr(self, f.name)
            result[f.name] = value.tolist() if isinstance(value, np.ndarray) else float(value)
        return result

    @classmethod
    def from_dict(cls, values: dict) -> "StereoEnergyParams":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown stereo parameters {sorted(unknown)}")
        return cls(**values)


@dataclass
class EnergyBreakdown:
    match: float
    smoothness: float
    texture: float
    extra: float = 0.0

    @property
    def total(self) -> float:
        return self.match + self.smoothness + self.texture + self.extra

    def as_tuple(self) -> typing.Tuple[float, float, float, float]:
        return self.match, self.smoothness, self.texture, self.total


def _check_planes(segmentation: Segmentation, planes) -> np.ndarray:
    planes = np.asarray(planes, dtype=float)
    if planes.shape != (segmentation.n_segments, 3):
        raise DataError(
            f"Expected planes of shape {(segmentation.n_segments, 3)}, got {planes.shape}"
        )
    return planes


def boundary_sums(
    segmentation: Segmentation, i: int, j: int, planes_i: np.ndarray, planes_j: np.ndarray
) -> np.ndarray:
    """Σ_{(p,q)∈B_ij} |d_i(p) - d_j(q)| for every pair of candidate planes, (K_i, K_j)"""
    pairs = segmentation.boundary(i, j)
    d_p = plane_disparity(planes_i[:, None, :], pairs[None, :, 1], pairs[None, :, 0])
    d_q = plane_disparity(planes_j[:, None, :], pairs[None, :, 3], pairs[None, :, 2])
    return np.abs(d_p[:, None, :] - d_q[None, :, :]).sum(axis=2)


def smoothness_energy(segmentation: Segmentation, planes, params: StereoEnergyParams) -> float:
    planes = _check_planes(segmentation, planes)
    total = 0.0
    for i, j in segmentation.edges:
        gap = boundary_sums(segmentation, i, j, planes[i : i + 1], planes[j : j + 1])[0, 0]
        total += min(params.tau_s, params.lambda_s * gap)
    return float(total)


def texture_energy(
    hog: np.ndarray, segmentation: Segmentation, planes, params: StereoEnergyParams
) -> float:
    planes = _check_planes(segmentation, planes)
    ys, xs = np.indices(segmentation.shape)
    pixel_planes = planes[segmentation.labels]
    d = plane_disparity(pixel_planes, xs, ys)
    residual_a = d * (hog @ params.beta_a) - pixel_planes[..., 0]
    residual_b = d * (hog @ params.beta_b) - pixel_planes[..., 1]
    cost = params.lambda_a * residual_a**2 + params.lambda_b * residual_b**2
    return float(np.minimum(params.tau_t, cost).sum())


class StereoEnergyModel:
    """
    Precomputed features of one rectified pair and its segmentation, evaluating the
    slanted-plane energy per superpixel for batches of candidate planes.

    Attributes:
        features_left, features_right (np.ndarray): (H, W, 9) Φ grids
        hog (np.ndarray): (H, W, 24) HOG pyramid of the left image
        segmentation (Segmentation): superpixels of the left image
        params (StereoEnergyParams): energy parameters
        extra_unary (callable or None): additional per-superpixel energy
    """

    def __init__(
        self,
        left: Image,
        right: Image,
        segmentation: Segmentation,
        params: StereoEnergyParams = None,
        hog: np.ndarray = None,
        extra_unary: ExtraUnary = None,
    ):
        if left.shape != right.shape:
            raise DimensionMismatchError(f"Stereo images differ in size: {left.shape} vs {right.shape}")
        if tuple(segmentation.shape) != tuple(left.shape):
            raise DimensionMismatchError(
                f"Segmentation {segmentation.shape} does not match image {left.shape}"
            )
        self.left = left
        self.right = right
        self.features_left = normalized_features(left)
        self.features_right = normalized_features(right)
        self.hog = hog_pyramid(left) if hog is None else hog
        self.segmentation = segmentation
        self.params = params or StereoEnergyParams()
        self.extra_unary = extra_unary
        self._pixels = [segmentation.pixels(i) for i in range(segmentation.n_segments)]

    @property
    def n_segments(self) -> int:
        return self.segmentation.n_segments

    def with_params(self, params: StereoEnergyParams) -> "StereoEnergyModel":
        """Shallow copy sharing the feature grids"""
        model = copy.copy(self)
        model.params = params
        return model

    def with_extra_unary(self, extra_unary: typing.Optional[ExtraUnary]) -> "StereoEnergyModel":
        model = copy.copy(self)
        model.extra_unary = extra_unary
        return model

    def disparities(self, i: int, planes: np.ndarray) -> np.ndarray:
        """(K, n_i) disparities of the pixels of superpixel i under K planes"""
        ys, xs = self._pixels[i]
        return plane_disparity(np.atleast_2d(planes)[:, None, :], xs[None, :], ys[None, :])

    def _match_squares(self, i: int, planes: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
        ys, xs = self._pixels[i]
        d = self.disparities(i, planes)
        rows = np.broadcast_to(ys[None, :], d.shape)
        values, inside = sample_columns(self.features_right, xs[None, :] - d, rows)
        residual = self.features_left[ys, xs][None, :, :] - values
        return residual, inside

    def match_terms(self, i: int, planes: np.ndarray) -> np.ndarray:
        residual, inside = self._match_squares(i, planes)
        cost = np.where(inside, residual**2 @ self.params.match_weights, self.params.kappa_border)
        return cost.sum(axis=1)

    def _texture_residuals(self, i: int, planes: np.ndarray):
        planes = np.atleast_2d(planes)
        ys, xs = self._pixels[i]
        d = self.disparities(i, planes)
        hog = self.hog[ys, xs]
        residual_a = d * (hog @ self.params.beta_a)[None, :] - planes[:, 0:1]
        residual_b = d * (hog @ self.params.beta_b)[None, :] - planes[:, 1:2]
        return residual_a, residual_b

    def texture_terms(self, i: int, planes: np.ndarray) -> np.ndarray:
        residual_a, residual_b = self._texture_residuals(i, planes)
        cost = self.params.lambda_a * residual_a**2 + self.params.lambda_b * residual_b**2
        return np.minimum(self.params.tau_t, cost).sum(axis=1)

    def unary_costs(self, i: int, planes: np.ndarray) -> np.ndarray:
        """Match plus texture energy (plus the extra term) of superpixel i, shape (K,)"""
        planes = np.atleast_2d(planes)
        cost = self.match_terms(i, planes) + self.texture_terms(i, planes)
        if self.extra_unary is not None:
            cost = cost + np.asarray(self.extra_unary(i, planes), dtype=float)
        return cost

    def pair_costs(self, i: int, j: int, planes_i: np.ndarray, planes_j: np.ndarray) -> np.ndarray:
        gaps = boundary_sums(
            self.segmentation, i, j, np.atleast_2d(planes_i), np.atleast_2d(planes_j)
        )
        return np.minimum(self.params.tau_s, self.params.lambda_s * gaps)

    def local_energy(self, i: int, planes: np.ndarray, candidates: np.ndarray) -> np.ndarray:
        """
        Energy terms touching superpixel i when it takes each candidate plane and
        the others keep `planes`.
        """
        candidates = np.atleast_2d(candidates)
        cost = self.unary_costs(i, candidates)
        for j in self.segmentation.adjacency[i]:
            cost = cost + self.pair_costs(i, j, candidates, planes[j : j + 1])[:, 0]
        return cost

    def match_energy(self, planes) -> float:
        planes = _check_planes(self.segmentation, planes)
        return float(sum(self.match_terms(i, planes[i : i + 1])[0] for i in range(self.n_segments)))

    def smoothness_energy(self, planes) -> float:
        return smoothness_energy(self.segmentation, planes, self.params)

    def texture_energy(self, planes) -> float:
        return texture_energy(self.hog, self.segmentation, planes, self.params)

    def extra_energy(self, planes) -> float:
        if self.extra_unary is None:
            return 0.0
        planes = _check_planes(self.segmentation, planes)
        return float(
            sum(np.asarray(self.extra_unary(i, planes[i : i + 1]))[0] for i in range(self.n_segments))
        )

    def energy(self, planes) -> EnergyBreakdown:
        return EnergyBreakdown(
            self.match_energy(planes),
            self.smoothness_energy(planes),
            self.texture_energy(planes),
            self.extra_energy(planes),
        )

    def total_energy(self, planes) -> float:
        return self.energy(planes).total

    def energy_gradient(self, planes) -> np.ndarray:
        """
        Derivative of E(Z) with respect to (λ_S, τ_S, λ_A, λ_B); a truncated term
        depends on its cap only.
        """
        planes = _check_planes(self.segmentation, planes)
        gradient = np.zeros(len(BETA_Y_NAMES))
        for i, j in self.segmentation.edges:
            gap = boundary_sums(self.segmentation, i, j, planes[i : i + 1], planes[j : j + 1])[0, 0]
            if self.params.lambda_s * gap < self.params.tau_s:
                gradient[0] += gap
            else:
                gradient[1] += 1.0
        for i in range(self.n_segments):
            residual_a, residual_b = self._texture_residuals(i, planes[i : i + 1])
            cost = self.params.lambda_a * residual_a**2 + self.params.lambda_b * residual_b**2
            active = cost < self.params.tau_t
            gradient[2] += float(np.sum(residual_a[active] ** 2))
            gradient[3] += float(np.sum(residual_b[active] ** 2))
        return gradient

    def match_residuals(self, planes) -> np.ndarray:
        """Φ differences of every in-bounds correspondence, (N, 9)"""
        planes = _check_planes(self.segmentation, planes)
        blocks = []
        for i in range(self.n_segments):
            residual, inside = self._match_squares(i, planes[i : i + 1])
            blocks.append(residual[0][inside[0]])
        return np.concatenate(blocks, axis=0)

    def out_of_bounds_count(self, planes) -> int:
        planes = _check_planes(self.segmentation, planes)
        return int(
            sum(np.sum(~self._match_squares(i, planes[i : i + 1])[1]) for i in range(self.n_segments))
        )

    def texture_regression_data(
        self, planes, min_disparity: float = 1e-3
    ) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Regression rows for the texture predictors: H(p) against A_i(p)/d(p) and
        B_i(p)/d(p), over pixels with d(p) > min_disparity.
        """
        planes = _check_planes(self.segmentation, planes)
        ys, xs = np.indices(self.segmentation.shape)
        pixel_planes = planes[self.segmentation.labels]
        d = plane_disparity(pixel_planes, xs, ys)
        usable = d > min_disparity
        return (
            self.hog[usable],
            pixel_planes[..., 0][usable] / d[usable],
            pixel_planes[..., 1][usable] / d[usable],
        )


def match_energy(
    left: Image, right: Image, segmentation: Segmentation, planes, params: StereoEnergyParams
) -> float:
    return StereoEnergyModel(left, right, segmentation, params).match_energy(planes)


def total_energy(
    left: Image,
    right: Image,
    segmentation: Segmentation,
    planes,
    params: StereoEnergyParams,
    hog: np.ndarray = None,
) -> typing.Tuple[float, float, float, float]:
    """(E_M, E_S, E_T, E)"""
    return StereoEnergyModel(left, right, segmentation, params, hog=hog).energy(planes).as_tuple()
