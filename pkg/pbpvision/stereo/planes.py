import logging
import os
import typing

import numpy as np
import pandas as pd

from ..errors import DataError, FitDegenerateError
from ..imaging.segmentation import Segmentation
from ..inference.mcmc import RngStream, as_stream

logger = logging.getLogger(__name__)

# Planes are rows (A, B, C) with d = A·x + B·y + C; a plane set is an (S, 3) array.
PLANE_COLUMNS = ["superpixel_id", "A", "B", "C"]


def plane_disparity(plane, x, y) -> np.ndarray:
    """
    Disparity of plane(s) at pixel(s). Broadcasts planes of shape (..., 3) against
    coordinates.
    """
    plane = np.asarray(plane, dtype=float)
    return plane[..., 0] * x + plane[..., 1] * y + plane[..., 2]


def disparity_from_planes(segmentation: Segmentation, planes: np.ndarray) -> np.ndarray:
    """Dense disparity map induced by one plane per superpixel"""
    planes = np.asarray(planes, dtype=float)
    if planes.shape != (segmentation.n_segments, 3):
        raise DataError(
            f"Expected {segmentation.n_segments} planes, got array of shape {planes.shape}"
        )
    ys, xs = np.indices(segmentation.shape)
    return plane_disparity(planes[segmentation.labels], xs, ys)


def fit_plane_lstsq(xs: np.ndarray, ys: np.ndarray, ds: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if len(xs) < 3:
        raise FitDegenerateError(f"Need at least 3 pixels to fit a plane, got {len(xs)}")
    design = np.stack([xs, np.asarray(ys, dtype=float), np.ones_like(xs)], axis=1)
    solution, _, rank, _ = np.linalg.lstsq(design, np.asarray(ds, dtype=float), rcond=None)
    if rank < 3:
        raise FitDegenerateError("Pixels are collinear")
    return solution


def _plane_through(points: np.ndarray) -> typing.Optional[np.ndarray]:
    """Exact plane through three (x, y, d) points, None when x, y are collinear"""
    design = np.column_stack([points[:, 0], points[:, 1], np.ones(3)])
    if abs(np.linalg.det(design)) < 1e-9:
        return None
    return np.linalg.solve(design, points[:, 2])


def ransac_plane_fit(
    xs: np.ndarray,
    ys: np.ndarray,
    disparities: np.ndarray,
    mask: np.ndarray = None,
    iters: int = 200,
    inlier_tol: float = 1.0,
    rng: RngStream = None,
) -> np.ndarray:
    """
    Robust plane fit: the hypothesis with the most inliers among `iters` random
    3-pixel samples (ties broken by lower inlier residual) is refit by least squares
    on its inliers. Collinear samples are discarded and redrawn.

    Args:
        xs, ys, disparities (np.ndarray): pixel coordinates and disparities
        mask (np.ndarray): usable pixels, all when None
        iters (int): number of non-degenerate hypotheses
        inlier_tol (float): absolute residual of an inlier, in pixels
        rng (RngStream): random stream

    Return:
        (3,) plane parameters
    """
    rng = as_stream(rng)
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    ds = np.asarray(disparities, dtype=float).ravel()
    usable = np.isfinite(ds) if mask is None else np.asarray(mask, dtype=bool).ravel() & np.isfinite(ds)
    xs, ys, ds = xs[usable], ys[usable], ds[usable]
    n = len(xs)
    if n < 3:
        raise FitDegenerateError(f"Need at least 3 usable pixels, got {n}")
    points = np.stack([xs, ys, ds], axis=1)

    best_inliers = None
    best_count, best_residual = -1, np.inf
    accepted, attempts = 0, 0
    while accepted < iters and attempts < 20 * iters:
        attempts += 1
        sample = rng.choice(n, size=3, replace=False)
        plane = _plane_through(points[sample])
        if plane is None:
            continue
        accepted += 1
        residual = np.abs(plane_disparity(plane, xs, ys) - ds)
        inliers = residual <= inlier_tol
        count = int(inliers.sum())
        total = float(residual[inliers].sum())
        if count > best_count or (count == best_count and total < best_residual):
            best_inliers, best_count, best_residual = inliers, count, total

    if best_inliers is None:
        raise FitDegenerateError("All sampled pixel triples were collinear")
    return fit_plane_lstsq(xs[best_inliers], ys[best_inliers], ds[best_inliers])


def robust_superpixel_plane(
    xs, ys, disparities, mask, iters: int = 200, inlier_tol: float = 1.0, rng=None
) -> np.ndarray:
    """RANSAC plane, or the constant plane at the median disparity when RANSAC cannot fit"""
    try:
        return ransac_plane_fit(xs, ys, disparities, mask, iters, inlier_tol, rng)
    except FitDegenerateError as error:
        ds = np.asarray(disparities, dtype=float).ravel()
        usable = np.asarray(mask, dtype=bool).ravel() if mask is not None else np.ones(len(ds), bool)
        values = ds[usable] if usable.any() else ds
        logger.warning(f"{error}; using the median-constant plane")
        return np.array([0.0, 0.0, float(np.median(values))])


def save_planes(planes: np.ndarray, path):
    planes = np.asarray(planes, dtype=float)
    frame = pd.DataFrame(planes, columns=PLANE_COLUMNS[1:])
    frame.insert(0, PLANE_COLUMNS[0], np.arange(len(planes)))
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")


def load_planes(path) -> np.ndarray:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as error:
        raise DataError(f"Cannot read {path}: {error}") from error
    if list(frame.columns) != PLANE_COLUMNS:
        raise DataError(f"Plane file {path} must have columns {PLANE_COLUMNS}")
    frame = frame.sort_values(PLANE_COLUMNS[0])
    if not np.array_equal(frame[PLANE_COLUMNS[0]].to_numpy(), np.arange(len(frame))):
        raise DataError(f"Plane file {path} does not list every superpixel once")
    return frame[PLANE_COLUMNS[1:]].to_numpy(dtype=float)
