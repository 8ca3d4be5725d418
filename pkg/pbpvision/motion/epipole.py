import logging
import typing

import numpy as np

from ..errors import EpipoleUnreliableError, TooFewMatchesError
from .matching import MIN_MATCHES

logger = logging.getLogger(__name__)


def normalize_points(points: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Translates the points to their centroid and scales them to a mean distance of
    sqrt(2).

    Return:
        (N, 3) normalized homogeneous points and the 3x3 transform
    """
    points = np.asarray(points, dtype=float)
    centroid = points.mean(axis=0)
    spread = np.mean(np.linalg.norm(points - centroid, axis=1))
    scale = np.sqrt(2) / spread if spread > 0 else 1.0
    transform = np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    homogeneous = np.column_stack([points, np.ones(len(points))])
    return homogeneous @ transform.T, transform


def fundamental_matrix(matches: np.ndarray, min_ratio: float = 1e-8) -> np.ndarray:
    """
    Normalized 8-point estimate of F with x_{t+1}ᵀ F x_t = 0, rank 2 enforced.
    """
    matches = np.asarray(matches, dtype=float).reshape(-1, 4)
    if len(matches) < MIN_MATCHES:
        raise TooFewMatchesError(f"Need at least {MIN_MATCHES} matches, got {len(matches)}")
    p0, t0 = normalize_points(matches[:, :2])
    p1, t1 = normalize_points(matches[:, 2:])
    design = np.einsum("ni,nj->nij", p1, p0).reshape(len(matches), 9)
    _, singular, vt = np.linalg.svd(design)
    # with 8 matches the ninth singular value is an implicit zero
    singular = np.concatenate([singular, np.zeros(9 - len(singular))])
    if singular[7] / singular[0] < min_ratio:
        raise EpipoleUnreliableError("Matches do not determine a unique fundamental matrix")
    f = vt[-1].reshape(3, 3)
    u, s, vt = np.linalg.svd(f)
    f = u @ np.diag([s[0], s[1], 0.0]) @ vt
    return t1.T @ f @ t0


def estimate_epipole(matches: np.ndarray, min_ratio: float = 1e-8) -> np.ndarray:
    """
    Epipole (x, y) of frame t, the right null direction of F. Under translation
    along the optical axis it is the focus of expansion shared by both frames.
    """
    f = fundamental_matrix(matches, min_ratio)
    _, _, vt = np.linalg.svd(f)
    e = vt[-1]
    if abs(e[2]) < 1e-12 * np.linalg.norm(e):
        raise EpipoleUnreliableError("Epipole lies at infinity")
    epipole = e[:2] / e[2]
    logger.debug(f"Epipole at ({epipole[0]:.2f}, {epipole[1]:.2f}) from {len(matches)} matches")
    return epipole
