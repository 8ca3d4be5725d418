"""
Dense integer-disparity stereo on the pixel grid and the left/right consistency check.

A left pixel (x, y) corresponds to the right pixel (x - d, y), d >= 0.
"""

import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DimensionMismatchError
from ..imaging.features import N_PIXEL_FEATURES, pixel_features
from ..imaging.image import Image, bias_gain_normalize
from ..inference.grid import grid_min_sum

logger = logging.getLogger(__name__)

DATA_TRUNCATION = 6.0


@dataclass
class DenseStereoParams:
    """
    Attributes:
        weights (np.ndarray): per-feature weights of the squared Φ difference
        truncation (float): cap of the per-pixel data cost, also charged out of bounds
        slope (float): smoothness cost per unit disparity step
        smooth_truncation (float): cap of the smoothness cost
        max_iters (int): grid BP rounds
    """

    weights: np.ndarray = field(default_factory=lambda: np.ones(N_PIXEL_FEATURES))
    truncation: float = DATA_TRUNCATION
    slope: float = 0.5
    smooth_truncation: float = 2.0
    max_iters: int = 60


@dataclass
class DisparityMap:
    values: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.values.shape


def normalized_features(image: Image) -> np.ndarray:
    """Φ of the bias/gain normalized image; constant channels are only centered"""
    return pixel_features(bias_gain_normalize(image, strict=False))


def sample_columns(
    features: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Linear interpolation of a (H, W, K) feature grid at fractional columns on
    integer rows.

    Return:
        values of shape xs.shape + (K,), and the in-bounds mask (0 <= x <= W - 1)
    """
    width = features.shape[1]
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=int)
    inside = (xs >= 0.0) & (xs <= width - 1)
    clipped = np.clip(xs, 0.0, width - 1)
    x0 = np.minimum(np.floor(clipped).astype(int), width - 1)
    x1 = np.minimum(x0 + 1, width - 1)
    t = (clipped - x0)[..., None]
    values = (1.0 - t) * features[ys, x0] + t * features[ys, x1]
    return values, inside


def matching_cost_volume(
    features_left: np.ndarray,
    features_right: np.ndarray,
    d_max: int,
    weights: np.ndarray = None,
    truncation: float = DATA_TRUNCATION,
) -> np.ndarray:
    """
    min(Σ_k w_k (Φ^L_k(x, y) - Φ^R_k(x - d, y))², truncation) for d = 0..d_max;
    correspondences falling outside the right image cost `truncation`.

    Return:
        (H, W, d_max + 1) array
    """
    if features_left.shape != features_right.shape:
        raise DimensionMismatchError(
            f"Feature grids differ: {features_left.shape} vs {features_right.shape}"
        )
    if weights is None:
        weights = np.ones(features_left.shape[2])
    height, width, _ = features_left.shape
    volume = np.full((height, width, d_max + 1), float(truncation))
    for d in range(min(d_max, width - 1) + 1):
        diff = features_left[:, d:, :] - features_right[:, : width - d, :]
        volume[:, d:, d] = np.minimum(diff**2 @ weights, truncation)
    return volume


def _check_pair(left: Image, right: Image, d_max: int):
    if left.shape != right.shape:
        raise DimensionMismatchError(f"Stereo images differ in size: {left.shape} vs {right.shape}")
    if d_max < 0:
        raise ConfigError(f"d_max must be non-negative, got {d_max}")


def dense_stereo(
    left: Image, right: Image, d_max: int, params: DenseStereoParams = None
) -> DisparityMap:
    """
    Integer disparities 0..d_max minimizing the truncated-quadratic Φ data cost plus
    the truncated-linear smoothness cost with min-sum BP on the pixel grid.
    """
    _check_pair(left, right, d_max)
    params = params or DenseStereoParams()
    volume = matching_cost_volume(
        normalized_features(left),
        normalized_features(right),
        d_max,
        params.weights,
        params.truncation,
    )
    solution = grid_min_sum(
        volume, params.slope, params.smooth_truncation, max_iters=params.max_iters
    )
    values = solution.labels.astype(float)
    xs = np.arange(left.width)[None, :]
    return DisparityMap(values, xs - values >= 0)


def _mirror(image: Image) -> Image:
    return Image(image.data[:, ::-1, :])


def right_disparity(
    left: Image, right: Image, d_max: int, params: DenseStereoParams = None
) -> DisparityMap:
    """
    Disparity map of the right view (right pixel (x, y) matches left (x + d, y)),
    computed by running dense_stereo on the mirrored pair.
    """
    mirrored = dense_stereo(_mirror(right), _mirror(left), d_max, params)
    values = mirrored.values[:, ::-1]
    xs = np.arange(left.width)[None, :]
    return DisparityMap(values, xs + values <= left.width - 1)


def mutual_consistency(
    d_left: np.ndarray, d_right: np.ndarray, tol: float = 1.0
) -> np.ndarray:
    """
    Occlusion mask of the left view: p is occluded when p - dL(p) leaves the image
    or |dL(p) - dR(p - dL(p))| > tol.
    """
    d_left = np.asarray(getattr(d_left, "values", d_left), dtype=float)
    d_right = np.asarray(getattr(d_right, "values", d_right), dtype=float)
    if d_left.shape != d_right.shape:
        raise DimensionMismatchError(f"Disparity maps differ: {d_left.shape} vs {d_right.shape}")
    height, width = d_left.shape
    ys, xs = np.indices((height, width))
    target = np.rint(xs - d_left).astype(int)
    outside = (target < 0) | (target > width - 1)
    looked_up = d_right[ys, np.clip(target, 0, width - 1)]
    return outside | (np.abs(d_left - looked_up) > tol)
