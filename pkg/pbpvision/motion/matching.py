"""
Sparse correspondences between consecutive frames: Harris corners matched by
zero-mean normalized cross-correlation inside a search window, optionally
restricted to a band around the epipolar line, and kept only when the backward
search lands on the starting corner.
"""

import logging
import typing

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from ..imaging.image import Image

logger = logging.getLogger(__name__)

# columns of a match array
MATCH_COLUMNS = ["x_t", "y_t", "x_t1", "y_t1"]
MIN_MATCHES = 8


def harris_response(gray: np.ndarray, sigma: float = 1.0, k: float = 0.04) -> np.ndarray:
    gx = ndimage.sobel(gray, axis=1)
    gy = ndimage.sobel(gray, axis=0)
    sxx = ndimage.gaussian_filter(gx * gx, sigma)
    syy = ndimage.gaussian_filter(gy * gy, sigma)
    sxy = ndimage.gaussian_filter(gx * gy, sigma)
    return sxx * syy - sxy**2 - k * (sxx + syy) ** 2


def harris_corners(
    gray: np.ndarray,
    max_corners: int = 200,
    min_distance: int = 4,
    threshold_rel: float = 0.01,
    border: int = 0,
) -> np.ndarray:
    """
    Local maxima of the Harris response above threshold_rel times the strongest
    response, strongest first.

    Return:
        (N, 2) integer (x, y) positions
    """
    response = harris_response(np.asarray(gray, dtype=float))
    peak = response.max()
    if peak <= 1e-12:
        return np.zeros((0, 2), dtype=int)
    local_max = ndimage.maximum_filter(response, size=2 * min_distance + 1) == response
    keep = local_max & (response > threshold_rel * peak)
    if border > 0:
        keep[:border] = keep[-border:] = False
        keep[:, :border] = keep[:, -border:] = False
    ys, xs = np.nonzero(keep)
    order = np.argsort(-response[ys, xs], kind="stable")[:max_corners]
    return np.stack([xs[order], ys[order]], axis=1)


def _standardize(windows: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
    flat = windows.reshape(windows.shape[:-2] + (-1,))
    centered = flat - flat.mean(axis=-1, keepdims=True)
    norm = np.linalg.norm(centered, axis=-1)
    return centered, norm


def _parabola_offset(left: float, center: float, right: float) -> float:
    denominator = left - 2 * center + right
    if denominator >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denominator, -0.5, 0.5))


class ZnccSearch:
    """
    Template search of patches of one frame inside another.

    Attributes:
        half (int): patch half size
        radius (int): search radius in pixels
        band (float): maximum distance from the epipolar line, when an epipole is given
    """

    def __init__(self, source: np.ndarray, target: np.ndarray, half: int = 3, radius: int = 8, band: float = 1.5):
        self.half = half
        self.radius = radius
        self.band = band
        size = 2 * half + 1
        self.source = sliding_window_view(source, (size, size))
        self.target_centered, self.target_norm = _standardize(sliding_window_view(target, (size, size)))

    def scores(self, x: int, y: int, epipole=None) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """ZNCC of the source patch at (x, y) with every candidate target center"""
        h = self.half
        rows, cols = self.target_norm.shape
        patch, norm = _standardize(self.source[y - h, x - h])
        ys, xs = np.mgrid[
            max(y - self.radius, h) : min(y + self.radius, rows + h - 1) + 1,
            max(x - self.radius, h) : min(x + self.radius, cols + h - 1) + 1,
        ]
        if epipole is not None:
            ex, ey = epipole
            direction = np.array([x - ex, y - ey], dtype=float)
            length = np.linalg.norm(direction)
            if length > 1e-9:
                direction /= length
                offset_x, offset_y = xs - x, ys - y
                distance = np.abs(offset_x * direction[1] - offset_y * direction[0])
                near = distance <= self.band
                ys, xs = ys[near], xs[near]
        ys, xs = ys.ravel(), xs.ravel()
        if norm < 1e-9 or len(xs) == 0:
            return xs, ys, np.full(len(xs), -np.inf)
        centered = self.target_centered[ys - h, xs - h]
        norms = self.target_norm[ys - h, xs - h]
        with np.errstate(divide="ignore", invalid="ignore"):
            values = centered @ patch / (norms * norm)
        return xs, ys, np.where(norms > 1e-9, values, -np.inf)

    def best(self, x: int, y: int, epipole=None) -> typing.Tuple[int, int, float, float, float]:
        xs, ys, values = self.scores(x, y, epipole)
        if len(values) == 0 or not np.isfinite(values.max()):
            return x, y, -np.inf, 0.0, 0.0
        k = int(np.argmax(values))
        bx, by = int(xs[k]), int(ys[k])
        lookup = {(int(a), int(b)): s for a, b, s in zip(xs, ys, values)}

        def around(dx, dy):
            return lookup.get((bx + dx, by + dy), values[k])

        sub_x = _parabola_offset(around(-1, 0), values[k], around(1, 0))
        sub_y = _parabola_offset(around(0, -1), values[k], around(0, 1))
        return bx, by, float(values[k]), sub_x, sub_y


def sparse_matches(
    frame_t: Image,
    frame_t1: Image,
    epipole=None,
    max_corners: int = 200,
    half: int = 3,
    radius: int = 8,
    band: float = 1.5,
    min_score: float = 0.8,
) -> np.ndarray:
    """
    Corner correspondences from frame t to frame t+1.

    Args:
        frame_t, frame_t1 (Image): consecutive frames
        epipole (tuple or None): restricts the search to the epipolar band
        max_corners (int): corners detected in frame t
        half (int): patch half size
        radius (int): search radius
        band (float): epipolar band half width
        min_score (float): minimum ZNCC of accepted matches

    Return:
        (M, 4) array of (x_t, y_t, x_t1, y_t1), empty for textureless frames
    """
    gray_t, gray_t1 = frame_t.gray(), frame_t1.gray()
    corners = harris_corners(gray_t, max_corners, border=half)
    forward = ZnccSearch(gray_t, gray_t1, half, radius, band)
    backward = ZnccSearch(gray_t1, gray_t, half, radius, band)
    matches = []
    for x, y in corners:
        bx, by, score, sub_x, sub_y = forward.best(int(x), int(y), epipole)
        if score < min_score:
            continue
        rx, ry, back_score, _, _ = backward.best(bx, by, epipole)
        if back_score < min_score or abs(rx - x) > 1 or abs(ry - y) > 1:
            continue
        matches.append((float(x), float(y), bx + sub_x, by + sub_y))
    if len(matches) < MIN_MATCHES:
        logger.warning(f"Only {len(matches)} sparse matches found")
    return np.array(matches, dtype=float).reshape(-1, 4)
