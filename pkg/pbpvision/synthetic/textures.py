import typing

import numpy as np
from scipy import ndimage

from ..inference.mcmc import RngStream, as_stream


def _rescale(values: np.ndarray) -> np.ndarray:
    low, high = values.min(), values.max()
    if high - low <= 0:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def smooth_noise_texture(
    shape: typing.Tuple[int, int], channels: int = 3, rng: RngStream = None, sigma: float = 1.2
) -> np.ndarray:
    """Gaussian-filtered white noise rescaled to [0, 1], shape (H, W, channels)"""
    rng = as_stream(rng)
    noise = rng.normal(size=(shape[0], shape[1], channels))
    smoothed = np.stack(
        [ndimage.gaussian_filter(noise[:, :, c], sigma, mode="wrap") for c in range(channels)],
        axis=2,
    )
    return np.stack([_rescale(smoothed[:, :, c]) for c in range(channels)], axis=2)


def random_segment_texture(
    shape: typing.Tuple[int, int],
    tilt: float = 0.0,
    n_segments: int = 96,
    length: float = 24.0,
    rng: RngStream = None,
    blur: float = 2.0,
) -> np.ndarray:
    """
    Random line segments on a plane tilted by `tilt` radians about the horizontal
    axis, which foreshortens the surface vertically by cos(tilt). The image is
    rendered at the scale where the vertical axis keeps its resolution, so surface
    coordinates are stretched horizontally by 1 / cos(tilt) instead; both give the
    same orientation statistics.

    Segment directions are stratified over [0, π) and centers are uniform on a
    surface torus, so every stroke is drawn whole. Strokes carry uniform intensity
    per unit surface length and are blurred by a Gaussian that is isotropic on the
    surface, which makes the image an exact linear warp of an isotropic texture.

    Return:
        (H, W) grayscale texture in [0, 1]
    """
    rng = as_stream(rng)
    height, width = shape
    stretch = 1.0 / max(np.cos(tilt), 1e-6)
    surface = np.array([width / stretch, height])
    centers = rng.uniform(0.0, 1.0, (n_segments, 2)) * surface
    angles = np.pi * (np.arange(n_segments) + rng.uniform(0.0, 1.0, n_segments)) / n_segments
    offsets = 0.5 * length * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    start = (centers - offsets) * [stretch, 1.0]
    stop = (centers + offsets) * [stretch, 1.0]

    canvas = np.zeros((height, width))
    for a, b in zip(start, stop):
        n_points = int(np.ceil(np.linalg.norm(b - a) / 0.5)) + 1
        t = np.linspace(0.0, 1.0, n_points)[:, None]
        points = a + t * (b - a)
        weight = length / (n_points - 1)
        x0 = np.floor(points[:, 0]).astype(int)
        y0 = np.floor(points[:, 1]).astype(int)
        fx = points[:, 0] - x0
        fy = points[:, 1] - y0
        x0, x1 = x0 % width, (x0 + 1) % width
        y0, y1 = y0 % height, (y0 + 1) % height
        np.add.at(canvas, (y0, x0), weight * (1 - fx) * (1 - fy))
        np.add.at(canvas, (y0, x1), weight * fx * (1 - fy))
        np.add.at(canvas, (y1, x0), weight * (1 - fx) * fy)
        np.add.at(canvas, (y1, x1), weight * fx * fy)
    texture = ndimage.gaussian_filter(canvas, (blur, blur * stretch), mode="wrap")
    return _rescale(texture)
