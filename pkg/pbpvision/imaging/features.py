"""
Per-pixel feature maps: the 9-dimensional matching feature Φ and the monocular
filter bank used by depth-from-one-view.
"""

import logging
import typing
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import HeightBinningError
from .image import LUMINANCE, Image, bias_gain_normalize

logger = logging.getLogger(__name__)

N_PIXEL_FEATURES = 9
N_HEIGHT_LEVELS = 40
MONOCULAR_SCALES = (1, 2, 4)
ENERGY_WINDOW = 5

L3 = np.array([1.0, 2.0, 1.0])
E3 = np.array([-1.0, 0.0, 1.0])
S3 = np.array([-1.0, 2.0, -1.0])
LAWS_VECTORS = {"L3": L3, "E3": E3, "S3": S3}
# 3x3 Laws masks, outer products of every ordered pair of the vectors above
LAWS_MASKS = [
    (f"{a}{b}", np.outer(LAWS_VECTORS[a], LAWS_VECTORS[b]))
    for a in LAWS_VECTORS
    for b in LAWS_VECTORS
]
# oriented edge filters every 30 degrees
EDGE_ANGLES = np.deg2rad(np.arange(0, 180, 30))


def central_gradients(plane: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Central differences with replicated borders; returns (d/dx, d/dy)"""
    padded = np.pad(plane, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx, gy


def pixel_features(image: Image) -> np.ndarray:
    """
    Φ(p): three colors followed by the x-gradients and the y-gradients of the
    three channels. Grayscale input is replicated to three channels.

    Args:
        image (Image): bias/gain normalized image

    Return:
        (height, width, 9) array
    """
    data = image.as_rgb().data
    gradients = [central_gradients(data[:, :, c]) for c in range(3)]
    gx = np.stack([g[0] for g in gradients], axis=2)
    gy = np.stack([g[1] for g in gradients], axis=2)
    return np.concatenate([data, gx, gy], axis=2)


@dataclass
class MonocularFeatures:
    """
    Attributes:
        features (np.ndarray): (height, width, D) with the bias as last entry
        height_level (np.ndarray): (height, width) integer level in 0..n_levels-1
        n_levels (int): number of height levels
    """

    features: np.ndarray
    height_level: np.ndarray
    n_levels: int = N_HEIGHT_LEVELS

    @property
    def dimension(self) -> int:
        return self.features.shape[2]


def _block_mean(plane: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return plane
    height, width = plane.shape
    pad_h = (-height) % factor
    pad_w = (-width) % factor
    padded = np.pad(plane, ((0, pad_h), (0, pad_w)), mode="edge")
    h, w = padded.shape
    return padded.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def _expand(small: np.ndarray, factor: int, shape) -> np.ndarray:
    rows = np.arange(shape[0]) // factor
    cols = np.arange(shape[1]) // factor
    return small[np.ix_(rows, cols)]


def filter_bank(intensity: np.ndarray, chroma: typing.Sequence[np.ndarray] = ()) -> np.ndarray:
    """
    Local energies of the 9 Laws masks and 6 oriented edge filters of an intensity
    plane, plus local means of the chroma planes.

    Return:
        (height, width, 15 + len(chroma)) array
    """
    responses = []
    for _, mask in LAWS_MASKS:
        filtered = ndimage.convolve(intensity, mask, mode="nearest")
        responses.append(ndimage.uniform_filter(np.abs(filtered), ENERGY_WINDOW, mode="nearest"))
    gx = ndimage.sobel(intensity, axis=1, mode="nearest")
    gy = ndimage.sobel(intensity, axis=0, mode="nearest")
    for angle in EDGE_ANGLES:
        oriented = np.cos(angle) * gx + np.sin(angle) * gy
        responses.append(ndimage.uniform_filter(np.abs(oriented), ENERGY_WINDOW, mode="nearest"))
    for plane in chroma:
        responses.append(ndimage.uniform_filter(plane, ENERGY_WINDOW, mode="nearest"))
    return np.stack(responses, axis=2)


def height_levels(height: int, width: int, n_levels: int = N_HEIGHT_LEVELS) -> np.ndarray:
    if height < n_levels:
        raise HeightBinningError(f"Image has {height} rows, fewer than {n_levels} height levels")
    rows = (n_levels * np.arange(height)) // height
    return np.repeat(rows[:, None], width, axis=1)


def monocular_features(image: Image, n_levels: int = N_HEIGHT_LEVELS) -> MonocularFeatures:
    """
    Filter responses at scales 1, 1/2 and 1/4, then normalized (x, y) and a bias.
    Color images give 17 responses per scale (15 on intensity, 2 chroma means),
    grayscale images 15.

    Return:
        MonocularFeatures with 54 (color) or 48 (grayscale) entries per pixel
    """
    height, width = image.shape
    levels = height_levels(height, width, n_levels)
    # centering keeps constant images valid and gives them zero filter energy
    data = bias_gain_normalize(image, strict=False).data
    if image.channels == 3:
        intensity = data @ LUMINANCE
        chroma = [data[:, :, 0] - intensity, data[:, :, 2] - intensity]
    else:
        intensity = data[:, :, 0]
        chroma = []

    blocks = []
    for factor in MONOCULAR_SCALES:
        small = filter_bank(
            _block_mean(intensity, factor), [_block_mean(c, factor) for c in chroma]
        )
        blocks.append(
            np.stack(
                [_expand(small[:, :, k], factor, (height, width)) for k in range(small.shape[2])],
                axis=2,
            )
        )
    ys, xs = np.indices((height, width), dtype=float)
    spatial = np.stack(
        [xs / max(width - 1, 1), ys / max(height - 1, 1), np.ones((height, width))], axis=2
    )
    features = np.concatenate(blocks + [spatial], axis=2)
    return MonocularFeatures(features, levels, n_levels)
