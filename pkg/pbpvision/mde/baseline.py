import typing

import numpy as np

from ..errors import DataError, DimensionMismatchError


class GroundPlaneBaseline:
    """
    Predicts, for every row, the mean disparity of that row over the training maps.
    """

    def __init__(self):
        self.row_means = None

    def fit(self, disparities: typing.Sequence[np.ndarray]) -> "GroundPlaneBaseline":
        if not disparities:
            raise DataError("The ground plane baseline needs at least one training map")
        stack = np.stack([np.asarray(d, dtype=float) for d in disparities])
        self.row_means = stack.mean(axis=(0, 2))
        return self

    def predict(self, shape: typing.Tuple[int, int]) -> np.ndarray:
        if self.row_means is None:
            raise DataError("The baseline has not been fitted")
        if shape[0] != len(self.row_means):
            raise DimensionMismatchError(
                f"Baseline fitted on {len(self.row_means)} rows, asked for {shape[0]}"
            )
        return np.repeat(self.row_means[:, None], shape[1], axis=1)


def ground_plane_baseline(disparities: typing.Sequence[np.ndarray]) -> GroundPlaneBaseline:
    return GroundPlaneBaseline().fit(disparities)


def fit_depth_scale(
    disparities: typing.Sequence[np.ndarray], depths: typing.Sequence[np.ndarray]
) -> float:
    """Least squares c of d ≈ c / Z over the whole corpus"""
    inverse = np.concatenate([1.0 / np.asarray(z, dtype=float).ravel() for z in depths])
    d = np.concatenate([np.asarray(d, dtype=float).ravel() for d in disparities])
    denominator = float(inverse @ inverse)
    if denominator <= 0:
        raise DataError("Cannot fit a depth scale without finite depths")
    return float(d @ inverse) / denominator


def rms_vs_groundtruth(d: np.ndarray, depth: np.ndarray, c: float) -> float:
    """sqrt(mean (d - c / Z)²)"""
    d = np.asarray(d, dtype=float)
    depth = np.asarray(depth, dtype=float)
    if d.shape != depth.shape:
        raise DimensionMismatchError(f"Disparity {d.shape} and depth {depth.shape} differ")
    return float(np.sqrt(np.mean((d - c / depth) ** 2)))


def rms_disparity(d: np.ndarray, reference: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(d, dtype=float) - np.asarray(reference, dtype=float)) ** 2)))
