"""
Disparity and image motion under forward translation along the optical axis.

With d = f h / z and a depth change Δz between frames, the velocity v = Δz / (f h)
gives d_{t+1} = d / (1 - d v), and every pixel moves radially away from the
epipole with r_{t+1} = r_t / (1 - d v).
"""

import typing

import numpy as np

from ..errors import BehindCameraError, ConfigError


def motion_scale(d, v) -> np.ndarray:
    return 1.0 - np.asarray(d, dtype=float) * np.asarray(v, dtype=float)


def valid_motion(d, v) -> np.ndarray:
    """True where the point stays in front of the camera"""
    return motion_scale(d, v) > 0


def _checked_scale(d, v) -> np.ndarray:
    scale = motion_scale(d, v)
    if np.any(scale <= 0):
        raise BehindCameraError("1 - d v must be positive, the point would pass the camera")
    return scale


def next_disparity(d, v) -> np.ndarray:
    return np.asarray(d, dtype=float) / _checked_scale(d, v)


def forward_project(x, y, d, v, epipole) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Pixel position(s) at t+1, moved along the ray from the epipole"""
    scale = _checked_scale(d, v)
    ex, ey = epipole
    return (
        ex + (np.asarray(x, dtype=float) - ex) / scale,
        ey + (np.asarray(y, dtype=float) - ey) / scale,
    )


def velocity_from_ratio(d, ratio) -> np.ndarray:
    """v solving r_{t+1} / r_t = ratio for disparity d"""
    return (1.0 - 1.0 / np.asarray(ratio, dtype=float)) / np.asarray(d, dtype=float)


def depth_change(v, focal: float, baseline: float) -> np.ndarray:
    """Δz = v f h"""
    if focal <= 0 or baseline <= 0:
        raise ConfigError("Focal length and baseline must be positive")
    return np.asarray(v, dtype=float) * focal * baseline


def velocity_from_depth_change(dz, focal: float, baseline: float) -> np.ndarray:
    if focal <= 0 or baseline <= 0:
        raise ConfigError("Focal length and baseline must be positive")
    return np.asarray(dz, dtype=float) / (focal * baseline)
