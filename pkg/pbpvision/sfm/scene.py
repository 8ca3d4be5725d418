import os
import typing
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import ConfigError, DimensionMismatchError
from ..inference.mcmc import RngStream, as_stream
from .camera import reproject

RESULT_COLUMNS = ["run", "method", "pose_err", "map_err"]


@dataclass
class SfmScene:
    """
    Ground truth and observations of a synthetic structure-from-motion problem.

    Attributes:
        poses (np.ndarray): (C, 6) camera poses
        points (np.ndarray): (P, 3) map points
        observations (np.ndarray): (C, P, 2) noisy image coordinates of every point in every camera
        focal (float): focal length in pixels
        sigma (float): observation noise in pixels
    """

    poses: np.ndarray
    points: np.ndarray
    observations: np.ndarray
    focal: float
    sigma: float

    @property
    def n_cams(self) -> int:
        return len(self.poses)

    @property
    def n_points(self) -> int:
        return len(self.points)


def synth_scene(
    n_points: int = 10,
    n_cams: int = 3,
    sigma: float = 1.0,
    rng: RngStream = None,
    focal: float = 500.0,
) -> SfmScene:
    """
    Points spread in front of a few cameras near the origin, observed by every
    camera with Gaussian pixel noise of standard deviation sigma.
    """
    if n_points < 1 or n_cams < 1:
        raise ConfigError("Need at least one point and one camera")
    if sigma < 0:
        raise ConfigError("Noise level must be non-negative")
    rng = as_stream(rng)
    points = np.column_stack(
        [
            rng.uniform(-1.0, 1.0, n_points),
            rng.uniform(-1.0, 1.0, n_points),
            rng.uniform(4.0, 6.0, n_points),
        ]
    )
    poses = np.column_stack(
        [rng.uniform(-0.3, 0.3, (n_cams, 3)), rng.uniform(-0.05, 0.05, (n_cams, 3))]
    )
    exact = reproject(poses[:, None, :], points[None, :, :], focal)
    observations = exact + sigma * rng.normal(size=exact.shape)
    return SfmScene(poses, points, observations, focal, sigma)


def reconstruction_errors(
    scene: SfmScene, poses: np.ndarray, points: np.ndarray
) -> typing.Tuple[float, float]:
    """Summed Euclidean deviation of the pose vectors and of the map points from the truth"""
    poses = np.asarray(poses, dtype=float)
    points = np.asarray(points, dtype=float)
    if poses.shape != scene.poses.shape or points.shape != scene.points.shape:
        raise DimensionMismatchError("Estimate does not match the scene size")
    pose_err = float(np.sum(np.linalg.norm(poses - scene.poses, axis=1)))
    map_err = float(np.sum(np.linalg.norm(points - scene.points, axis=1)))
    return pose_err, map_err


def save_results(rows: typing.Sequence[dict], path: str) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=RESULT_COLUMNS)
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    return frame
