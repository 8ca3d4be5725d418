"""
Histograms of edge orientation at three cell sizes.

Orientations are unsigned edge directions (perpendicular to the gradient) in
[0°, 180°), hard-binned into 8 bins of 22.5° and weighted by gradient magnitude.
Cell sums come from integral images; every cell histogram is L1-normalized when it
holds any gradient energy and left at zero otherwise.
"""

import typing

import numpy as np
from scipy import ndimage

from .image import Image

N_BINS = 8
CELL_SIZES = (8, 16, 32)
HOG_DIMENSION = N_BINS * len(CELL_SIZES)


def gradient_bins(
    gray: np.ndarray, n_bins: int = N_BINS, offset: float = 0.0
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Gradient magnitude and edge-orientation bin of every pixel, using the
    [-1, 0, 1] masks with replicated borders. Angles are shifted by `offset`
    radians before binning.
    """
    padded = np.pad(np.asarray(gray, dtype=float), 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    magnitude = np.hypot(gx, gy)
    edge_angle = np.mod(np.arctan2(gy, gx) + np.pi / 2, np.pi)
    bins = np.floor((edge_angle + offset) / (np.pi / n_bins) + 1e-9).astype(int) % n_bins
    return magnitude, bins


def integral_image(plane: np.ndarray) -> np.ndarray:
    """Zero-padded summed-area table of shape (H + 1, W + 1)"""
    table = np.zeros((plane.shape[0] + 1, plane.shape[1] + 1))
    table[1:, 1:] = plane.cumsum(axis=0).cumsum(axis=1)
    return table


def _normalize_l1(histograms: np.ndarray) -> np.ndarray:
    totals = histograms.sum(axis=-1, keepdims=True)
    return np.divide(histograms, totals, out=np.zeros_like(histograms), where=totals > 0)


def cell_histograms(gray: np.ndarray, cell_size: int, n_bins: int = N_BINS) -> np.ndarray:
    """
    L1-normalized histograms of the cells tiling the image from its top-left corner.

    Return:
        (ceil(H / cell_size), ceil(W / cell_size), n_bins) array
    """
    magnitude, bins = gradient_bins(gray, n_bins)
    height, width = magnitude.shape
    y_edges = np.minimum(np.arange(0, height + cell_size, cell_size), height)
    x_edges = np.minimum(np.arange(0, width + cell_size, cell_size), width)
    y_edges = np.unique(y_edges)
    x_edges = np.unique(x_edges)
    y0, y1 = y_edges[:-1], y_edges[1:]
    x0, x1 = x_edges[:-1], x_edges[1:]
    histograms = np.zeros((len(y0), len(x0), n_bins))
    for b in range(n_bins):
        table = integral_image(np.where(bins == b, magnitude, 0.0))
        histograms[:, :, b] = (
            table[np.ix_(y1, x1)] - table[np.ix_(y0, x1)] - table[np.ix_(y1, x0)] + table[np.ix_(y0, x0)]
        )
    return _normalize_l1(histograms)


def hog_pyramid(image: Image, cell_sizes: typing.Sequence[int] = CELL_SIZES) -> np.ndarray:
    """
    H(p): each pixel takes the histograms of its enclosing cell at every cell size.

    Return:
        (height, width, 8 * len(cell_sizes)) array
    """
    gray = image.gray()
    height, width = gray.shape
    blocks = []
    for size in cell_sizes:
        cells = cell_histograms(gray, size)
        rows = np.arange(height) // size
        cols = np.arange(width) // size
        blocks.append(cells[np.ix_(rows, cols)])
    return np.concatenate(blocks, axis=2)


def global_histogram(gray: np.ndarray, smoothing: float = 0.5, n_bins: int = N_BINS) -> np.ndarray:
    """
    Whole-image orientation histogram after Gaussian smoothing of the image, with
    bins centered on multiples of 180° / n_bins so that the horizontal and vertical
    edge directions each fall in the middle of a bin.
    """
    if smoothing > 0:
        gray = ndimage.gaussian_filter(np.asarray(gray, dtype=float), smoothing, mode="nearest")
    magnitude, bins = gradient_bins(gray, n_bins, offset=np.pi / (2 * n_bins))
    histogram = np.bincount(bins.ravel(), weights=magnitude.ravel(), minlength=n_bins)
    return _normalize_l1(histogram)


def orientation_ratio(histogram: np.ndarray) -> float:
    """H_min / H_max of an orientation histogram"""
    histogram = np.asarray(histogram, dtype=float)
    if histogram.max() <= 0:
        return 1.0
    return float(histogram.min() / histogram.max())


def tilt_from_ratio(ratio: float) -> float:
    """Surface tilt Ψ (radians) from H_min / H_max = cos³Ψ"""
    return float(np.arccos(np.clip(ratio, 0.0, 1.0) ** (1.0 / 3.0)))
