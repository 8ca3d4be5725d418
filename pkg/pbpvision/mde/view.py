"""
View prediction from a disparity map and the distortion score used to evaluate
disparities without ground truth.
"""

import typing
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError, EvaluationError
from ..imaging.image import Image


@dataclass
class ViewPrediction:
    """
    Attributes:
        image (Image): predicted view with holes filled
        filled (np.ndarray): (H, W) True where a source pixel landed, False for filled holes
        disparity (np.ndarray): (H, W) disparity of the source pixel shown, NaN in holes
    """

    image: Image
    filled: np.ndarray
    disparity: np.ndarray


def forward_warp(
    values: np.ndarray, target_x: np.ndarray, target_y: np.ndarray, depth_key: np.ndarray
) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Splats every source pixel to the rounded target position; where several
    land on one pixel the largest depth_key (the closest point) wins.

    Args:
        values (np.ndarray): (H, W, C) source values
        target_x, target_y (np.ndarray): (H, W) target coordinates
        depth_key (np.ndarray): (H, W) collision priority

    Return:
        warped values (H, W, C), landed mask (H, W), warped depth_key with NaN where empty
    """
    height, width, channels = values.shape
    tx = np.rint(target_x).astype(int).ravel()
    ty = np.rint(target_y).astype(int).ravel()
    key = np.asarray(depth_key, dtype=float).ravel()
    inside = (tx >= 0) & (tx < width) & (ty >= 0) & (ty < height) & np.isfinite(key)
    source = np.flatnonzero(inside)
    # ascending priority, later writes win
    source = source[np.argsort(key[source], kind="stable")]
    target = ty[source] * width + tx[source]

    warped = np.zeros((height * width, channels))
    landed = np.zeros(height * width, dtype=bool)
    warped_key = np.full(height * width, np.nan)
    warped[target] = values.reshape(-1, channels)[source]
    landed[target] = True
    warped_key[target] = key[source]
    return (
        warped.reshape(height, width, channels),
        landed.reshape(height, width),
        warped_key.reshape(height, width),
    )


def fill_holes(
    values: np.ndarray, landed: np.ndarray, key: np.ndarray
) -> np.ndarray:
    """
    Fills every empty pixel from the nearest landed pixel on its row, taking the
    side with the lower key (farther surface); a single available side is used as is.
    """
    height, width, _ = values.shape
    result = values.copy()
    columns = np.arange(width)
    for y in range(height):
        row_landed = landed[y]
        if row_landed.all() or not row_landed.any():
            continue
        left_index = np.maximum.accumulate(np.where(row_landed, columns, -1))
        right_index = np.minimum.accumulate(np.where(row_landed, columns, width)[::-1])[::-1]
        for x in np.flatnonzero(~row_landed):
            a, b = left_index[x], right_index[x]
            if a < 0:
                source = b
            elif b >= width:
                source = a
            elif key[y, a] < key[y, b]:
                source = a
            elif key[y, b] < key[y, a]:
                source = b
            else:
                source = a if x - a <= b - x else b
            result[y, x] = values[y, source]
    return result


def view_predict(
    left: Image,
    disparity: np.ndarray,
    target_mean: np.ndarray = None,
    target_std: np.ndarray = None,
) -> ViewPrediction:
    """
    Predicts the right view: each left pixel moves to column x - d(p) (rounded) after
    mapping its intensity to the target's bias and gain,
    Î = (I - mean_L) / std_L · std_R + mean_R per channel.

    Args:
        left (Image): source view
        disparity (np.ndarray): (H, W) left disparities
        target_mean, target_std (np.ndarray): per-channel statistics of the target
            view, those of the source when omitted
    """
    disparity = np.asarray(disparity, dtype=float)
    if disparity.shape != tuple(left.shape):
        raise DimensionMismatchError(f"Disparity {disparity.shape} does not match image {left.shape}")
    source_mean, source_std = left.mean, left.std
    target_mean = source_mean if target_mean is None else np.asarray(target_mean, dtype=float)
    target_std = source_std if target_std is None else np.asarray(target_std, dtype=float)
    gain = np.divide(target_std, source_std, out=np.ones_like(source_std), where=source_std > 0)
    mapped = (left.data - source_mean) * gain + target_mean

    ys, xs = np.indices(left.shape)
    warped, landed, key = forward_warp(mapped, xs - disparity, ys, disparity)
    return ViewPrediction(Image(fill_holes(warped, landed, key)), landed, key)


def distortion(
    predicted: Image, actual: Image, mask: np.ndarray = None, variance: np.ndarray = None
) -> float:
    """
    Mean over masked pixels and channels of (Î - I)² / σ², σ² the per-channel
    variance of the actual image. Predicting the channel means scores 1.
    """
    if predicted.data.shape != actual.data.shape:
        raise DimensionMismatchError(
            f"Prediction {predicted.data.shape} does not match image {actual.data.shape}"
        )
    variance = actual.data.var(axis=(0, 1)) if variance is None else np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise EvaluationError("Distortion is undefined for a constant channel")
    mask = np.ones(actual.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EvaluationError("Distortion over an empty mask")
    squared = (predicted.data - actual.data) ** 2 / variance
    return float(squared[mask].mean())


def view_prediction_error(left: Image, right: Image, disparity: np.ndarray) -> float:
    """Distortion of the predicted right view over the pixels that received a source pixel"""
    prediction = view_predict(left, disparity, right.mean, right.std)
    return distortion(prediction.image, right, prediction.filled)
