"""
Pinhole cameras posed by a translation and three rotation angles.

A pose (t_x, t_y, t_z, α, β, γ) maps a world point Y to camera coordinates
X = R Y + t with R = R_z(γ) R_y(β) R_x(α), and X projects to (f X_x / X_z, f X_y / X_z).
"""

import numpy as np

from ..errors import BehindCameraError, ConfigError

POSE_DIMENSION = 6
POINT_DIMENSION = 3


def rotation_matrix(angles) -> np.ndarray:
    """(..., 3, 3) rotation R_z R_y R_x for angles of shape (..., 3)"""
    angles = np.asarray(angles, dtype=float)
    ca, sa = np.cos(angles[..., 0]), np.sin(angles[..., 0])
    cb, sb = np.cos(angles[..., 1]), np.sin(angles[..., 1])
    cg, sg = np.cos(angles[..., 2]), np.sin(angles[..., 2])
    rotation = np.empty(angles.shape[:-1] + (3, 3))
    rotation[..., 0, 0] = cg * cb
    rotation[..., 0, 1] = cg * sb * sa - sg * ca
    rotation[..., 0, 2] = cg * sb * ca + sg * sa
    rotation[..., 1, 0] = sg * cb
    rotation[..., 1, 1] = sg * sb * sa + cg * ca
    rotation[..., 1, 2] = sg * sb * ca - cg * sa
    rotation[..., 2, 0] = -sb
    rotation[..., 2, 1] = cb * sa
    rotation[..., 2, 2] = cb * ca
    return rotation


def camera_coordinates(pose, point) -> np.ndarray:
    """R Y + t, broadcasting poses (..., 6) against points (..., 3)"""
    pose = np.asarray(pose, dtype=float)
    point = np.asarray(point, dtype=float)
    rotation = rotation_matrix(pose[..., 3:])
    return np.einsum("...ij,...j->...i", rotation, point) + pose[..., :3]


def reproject(pose, point, focal: float = 1.0, check: bool = True) -> np.ndarray:
    """
    Image coordinates (..., 2) of world points seen from poses.

    Raises:
        BehindCameraError: when check is set and a point has camera depth <= 0
    """
    if focal <= 0:
        raise ConfigError("Focal length must be positive")
    camera = camera_coordinates(pose, point)
    depth = camera[..., 2]
    if check and np.any(depth <= 0):
        raise BehindCameraError("Point behind the camera")
    with np.errstate(divide="ignore", invalid="ignore"):
        return focal * camera[..., :2] / depth[..., None]


def reprojection_log_potential(observation, sigma: float, focal: float):
    """
    log Ψ(P, Y) = -‖Q(P, Y) - x‖² / 2σ², -inf for points behind the camera.
    The callable takes (pose, point) arrays that broadcast against each other.
    """
    if sigma <= 0:
        raise ConfigError("Observation noise must be positive")
    observation = np.asarray(observation, dtype=float)

    def potential(pose, point):
        camera = camera_coordinates(pose, point)
        depth = camera[..., 2]
        ahead = depth > 0
        safe = np.where(ahead, depth, 1.0)
        projected = focal * camera[..., :2] / safe[..., None]
        value = -np.sum((projected - observation) ** 2, axis=-1) / (2 * sigma**2)
        return np.where(ahead, value, -np.inf)

    return potential
