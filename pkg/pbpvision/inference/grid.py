"""
Min-sum belief propagation on a 4-connected pixel grid with a truncated-linear
pairwise cost, the message passing used by the dense stereo and monocular solvers.
"""

import logging
import typing
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class GridSolution:
    labels: np.ndarray
    beliefs: np.ndarray
    iterations: int
    converged: bool


def truncated_linear_envelope(h: np.ndarray, slope: float, truncation: float) -> np.ndarray:
    """
    Computes min_j h[..., j] + min(slope·|i - j|, truncation) for every label i
    with two passes over the last axis.
    """
    f = np.array(h, dtype=float, copy=True)
    n_labels = f.shape[-1]
    for j in range(1, n_labels):
        f[..., j] = np.minimum(f[..., j], f[..., j - 1] + slope)
    for j in range(n_labels - 2, -1, -1):
        f[..., j] = np.minimum(f[..., j], f[..., j + 1] + slope)
    return np.minimum(f, h.min(axis=-1, keepdims=True) + truncation)


def _send(h: np.ndarray, slope: float, truncation: float) -> np.ndarray:
    message = truncated_linear_envelope(h, slope, truncation)
    return message - message.min(axis=-1, keepdims=True)


def grid_min_sum(
    data_cost: np.ndarray,
    slope: float,
    truncation: float,
    max_iters: int = 100,
    tol: float = 1e-5,
) -> GridSolution:
    """
    Synchronous min-sum BP over an H×W grid.

    Args:
        data_cost (np.ndarray): (H, W, L) cost of each integer label at each pixel
        slope (float): cost per unit label difference between 4-neighbors
        truncation (float): cap of the pairwise cost
        max_iters (int): maximum number of message rounds
        tol (float): stop when no message entry moves more than this

    Return:
        GridSolution with the argmin labels (lowest label on ties) and min-beliefs
    """
    data_cost = np.asarray(data_cost, dtype=float)
    height, width, _ = data_cost.shape
    from_up = np.zeros_like(data_cost)
    from_down = np.zeros_like(data_cost)
    from_left = np.zeros_like(data_cost)
    from_right = np.zeros_like(data_cost)

    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        new_up = np.zeros_like(data_cost)
        new_down = np.zeros_like(data_cost)
        new_left = np.zeros_like(data_cost)
        new_right = np.zeros_like(data_cost)
        if height > 1:
            h = data_cost + from_up + from_left + from_right
            new_up[1:] = _send(h[:-1], slope, truncation)
            h = data_cost + from_down + from_left + from_right
            new_down[:-1] = _send(h[1:], slope, truncation)
        if width > 1:
            h = data_cost + from_up + from_down + from_left
            new_left[:, 1:] = _send(h[:, :-1], slope, truncation)
            h = data_cost + from_up + from_down + from_right
            new_right[:, :-1] = _send(h[:, 1:], slope, truncation)

        delta = max(
            np.max(np.abs(new_up - from_up)),
            np.max(np.abs(new_down - from_down)),
            np.max(np.abs(new_left - from_left)),
            np.max(np.abs(new_right - from_right)),
        )
        from_up, from_down, from_left, from_right = new_up, new_down, new_left, new_right
        if delta < tol:
            converged = True
            break

    if not converged:
        logger.debug(f"Grid BP stopped after {max_iters} rounds")
    beliefs = data_cost + from_up + from_down + from_left + from_right
    return GridSolution(np.argmin(beliefs, axis=-1), beliefs, iteration, converged)


def grid_energy(
    data_cost: np.ndarray, labels: np.ndarray, slope: float, truncation: float
) -> float:
    """Data plus truncated-linear smoothness energy of an integer label map"""
    labels = np.asarray(labels, dtype=int)
    rows, cols = np.indices(labels.shape)
    total = float(np.sum(data_cost[rows, cols, labels]))
    for diff in (np.diff(labels, axis=0), np.diff(labels, axis=1)):
        total += float(np.sum(np.minimum(slope * np.abs(diff), truncation)))
    return total


def grid_edges(shape: typing.Tuple[int, int]) -> typing.List[typing.Tuple[int, int]]:
    """Pairs of flat pixel indices of all 4-adjacent pixels, row-major"""
    height, width = shape
    index = np.arange(height * width).reshape(height, width)
    pairs = list(zip(index[:, :-1].ravel(), index[:, 1:].ravel()))
    pairs += list(zip(index[:-1, :].ravel(), index[1:, :].ravel()))
    return [(int(a), int(b)) for a, b in pairs]
