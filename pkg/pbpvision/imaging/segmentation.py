import logging
import typing

import numpy as np
from scipy import ndimage

from ..errors import ConfigError, DimensionMismatchError
from .image import Image, load_label_map, save_label_map

logger = logging.getLogger(__name__)


def relabel_dense(labels: np.ndarray) -> np.ndarray:
    """Maps arbitrary labels to 0..S-1 in order of first appearance in raster order"""
    flat = np.asarray(labels).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].reshape(np.shape(labels))


class Segmentation:
    """
    Partition of the image into superpixels.

    Attributes:
        labels (np.ndarray): (H, W) dense superpixel ids 0..S-1
        n_segments (int): S
        adjacency (dict): superpixel -> sorted list of 4-adjacent superpixels
        boundaries (dict): (i, j) with i < j -> (m, 4) int array of pixel pairs
            (py, px, qy, qx), p in i and q in j, 4-adjacent
    """

    def __init__(self, labels: np.ndarray):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 2:
            raise DimensionMismatchError("A label map must be two dimensional")
        self.labels = labels
        self.n_segments = int(labels.max()) + 1 if labels.size else 0
        self._build()

    def _build(self):
        labels = self.labels
        flat = labels.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_segments)
        starts = np.concatenate([[0], np.cumsum(counts)])
        self._pixel_index = [order[starts[i] : starts[i + 1]] for i in range(self.n_segments)]

        ys, xs = np.indices(labels.shape)
        pairs = []
        for p_y, p_x, q_y, q_x in (
            (ys[:, :-1], xs[:, :-1], ys[:, 1:], xs[:, 1:]),
            (ys[:-1, :], xs[:-1, :], ys[1:, :], xs[1:, :]),
        ):
            a = labels[p_y, p_x]
            b = labels[q_y, q_x]
            differ = a != b
            block = np.stack([p_y[differ], p_x[differ], q_y[differ], q_x[differ]], axis=1)
            swap = a[differ] > b[differ]
            block[swap] = block[swap][:, [2, 3, 0, 1]]
            pairs.append(block)
        pairs = np.concatenate(pairs, axis=0) if pairs else np.zeros((0, 4), dtype=int)
        i = labels[pairs[:, 0], pairs[:, 1]]
        j = labels[pairs[:, 2], pairs[:, 3]]
        sort = np.lexsort((pairs[:, 3], pairs[:, 2], pairs[:, 1], pairs[:, 0], j, i))
        pairs, i, j = pairs[sort], i[sort], j[sort]

        self.boundaries: typing.Dict[typing.Tuple[int, int], np.ndarray] = {}
        self.adjacency: typing.Dict[int, typing.List[int]] = {s: [] for s in range(self.n_segments)}
        if len(pairs):
            keys = np.stack([i, j], axis=1)
            change = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
            bounds = np.concatenate([[0], change, [len(keys)]])
            for start, stop in zip(bounds[:-1], bounds[1:]):
                key = (int(i[start]), int(j[start]))
                self.boundaries[key] = pairs[start:stop]
                self.adjacency[key[0]].append(key[1])
                self.adjacency[key[1]].append(key[0])
        for s in self.adjacency:
            self.adjacency[s].sort()

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.labels.shape

    def pixels(self, i: int) -> typing.Tuple[np.ndarray, np.ndarray]:
        """(ys, xs) of the pixels of superpixel i in raster order"""
        index = self._pixel_index[i]
        return index // self.labels.shape[1], index % self.labels.shape[1]

    def size(self, i: int) -> int:
        return len(self._pixel_index[i])

    def boundary(self, i: int, j: int) -> np.ndarray:
        """Pixel pairs (p in i, q in j)"""
        if i < j:
            return self.boundaries.get((i, j), np.zeros((0, 4), dtype=int))
        return self.boundary(j, i)[:, [2, 3, 0, 1]]

    @property
    def edges(self) -> typing.List[typing.Tuple[int, int]]:
        return sorted(self.boundaries)

    def __eq__(self, other):
        return isinstance(other, Segmentation) and np.array_equal(self.labels, other.labels)


class DisjointSet:
    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=int)
        self.internal = np.zeros(n)

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int, weight: float = 0.0) -> int:
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.internal[a] = max(self.internal[a], self.internal[b], weight)
        return a


def _grid_edges_8(data: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    height, width, _ = data.shape
    index = np.arange(height * width).reshape(height, width)
    sources, targets, weights = [], [], []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        y0, y1 = 0, height - dy
        x0, x1 = max(0, -dx), width - max(0, dx)
        a = index[y0:y1, x0:x1]
        b = index[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        diff = data[y0:y1, x0:x1] - data[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        sources.append(a.ravel())
        targets.append(b.ravel())
        weights.append(np.sqrt(np.sum(diff**2, axis=2)).ravel())
    return np.concatenate(sources), np.concatenate(targets), np.concatenate(weights)


def fh_segment(
    image: Image, k: float = 300.0, min_size: int = 50, rng=None, sigma: float = 0.8
) -> Segmentation:
    """
    Graph-based over-segmentation: Kruskal-style merging of 8-connected pixel
    edges weighted by color distance (intensities on a 0..255 scale), with the
    threshold τ(C) = k / |C|, followed by merging of components below min_size.
    The result is deterministic; `rng` is accepted for interface symmetry.

    Args:
        image (Image): input image with intensities in [0, 1]
        k (float): scale of the merging threshold
        min_size (int): smallest allowed superpixel
        sigma (float): Gaussian pre-smoothing, 0 to disable

    Return:
        Segmentation with labels numbered in raster order of first appearance
    """
    if k <= 0:
        raise ConfigError(f"k must be positive, got {k}")
    data = image.data * 255.0
    if sigma > 0:
        data = np.stack(
            [ndimage.gaussian_filter(data[:, :, c], sigma, mode="nearest") for c in range(data.shape[2])],
            axis=2,
        )
    height, width = image.shape
    sources, targets, weights = _grid_edges_8(data)
    order = np.argsort(weights, kind="stable")
    forest = DisjointSet(height * width)

    for e in order:
        a = forest.find(sources[e])
        b = forest.find(targets[e])
        if a == b:
            continue
        w = weights[e]
        if w <= min(forest.internal[a] + k / forest.size[a], forest.internal[b] + k / forest.size[b]):
            forest.union(a, b, w)

    for e in order:
        a = forest.find(sources[e])
        b = forest.find(targets[e])
        if a != b and (forest.size[a] < min_size or forest.size[b] < min_size):
            forest.union(a, b, weights[e])

    roots = np.array([forest.find(p) for p in range(height * width)])
    return Segmentation(relabel_dense(roots.reshape(height, width)))


def load_segmentation(path, shape: typing.Tuple[int, int] = None) -> Segmentation:
    """
    Reads a 16-bit PGM label map. Non-dense labels are renumbered with a warning.
    """
    labels = load_label_map(path)
    if shape is not None and tuple(labels.shape) != tuple(shape):
        raise DimensionMismatchError(f"Label map {labels.shape} does not match image {shape}")
    unique = np.unique(labels)
    if not np.array_equal(unique, np.arange(len(unique))):
        logger.warning(f"Label map {path} is not dense, relabeling {len(unique)} segments")
        labels = relabel_dense(labels)
    return Segmentation(labels)


def save_segmentation(segmentation: Segmentation, path):
    save_label_map(segmentation.labels, path)
