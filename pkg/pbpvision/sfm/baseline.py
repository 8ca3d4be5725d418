import logging
import typing
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .camera import POINT_DIMENSION, POSE_DIMENSION, reproject

logger = logging.getLogger(__name__)


@dataclass
class BaselineResult:
    """
    Attributes:
        poses, points (np.ndarray): mode estimate
        initial_cost, final_cost (float): half the summed squared reprojection residuals
        n_evaluations (int): residual evaluations used
    """

    poses: np.ndarray
    points: np.ndarray
    initial_cost: float
    final_cost: float
    n_evaluations: int


def reprojection_residuals(
    poses: np.ndarray, points: np.ndarray, observations: np.ndarray, focal: float
) -> np.ndarray:
    projected = reproject(poses[:, None, :], points[None, :, :], focal, check=False)
    return (projected - observations).ravel()


def mode_baseline(
    observations: np.ndarray,
    init_poses: np.ndarray,
    init_points: np.ndarray,
    sigma: float = 1.0,
    focal: float = 500.0,
    optimize_cameras: bool = True,
    xtol: float = 1e-10,
    max_nfev: int = None,
) -> BaselineResult:
    """
    Mode of the posterior by Levenberg-Marquardt on the reprojection residuals
    scaled by 1/σ, starting at the given estimate. With optimize_cameras False the
    poses stay fixed and only the points move.
    """
    observations = np.asarray(observations, dtype=float)
    init_poses = np.asarray(init_poses, dtype=float)
    init_points = np.asarray(init_points, dtype=float)
    n_cams, n_points = len(init_poses), len(init_points)
    weight = 1.0 / sigma if sigma > 0 else 1.0

    def unpack(x) -> typing.Tuple[np.ndarray, np.ndarray]:
        if optimize_cameras:
            poses = x[: n_cams * POSE_DIMENSION].reshape(n_cams, POSE_DIMENSION)
            points = x[n_cams * POSE_DIMENSION :].reshape(n_points, POINT_DIMENSION)
        else:
            poses = init_poses
            points = x.reshape(n_points, POINT_DIMENSION)
        return poses, points

    def residuals(x):
        poses, points = unpack(x)
        return weight * reprojection_residuals(poses, points, observations, focal)

    x0 = np.concatenate([init_poses.ravel(), init_points.ravel()]) if optimize_cameras else init_points.ravel()
    initial = residuals(x0)
    method = "lm" if initial.size >= x0.size else "trf"
    solution = least_squares(residuals, x0, method=method, xtol=xtol, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev)
    poses, points = unpack(solution.x)
    logger.debug(f"Mode baseline: cost {0.5 * initial @ initial:.4g} -> {solution.cost:.4g}")
    return BaselineResult(
        np.array(poses), np.array(points), float(0.5 * initial @ initial), float(solution.cost), int(solution.nfev)
    )
