"""
Rendered piecewise-planar stereo pairs with ground truth.

Textures are painted in left-image coordinates: the left pixel (x, y) of plane k
shows T_k(x, y), and the right pixel (x_r, y) shows T_k at the left column x_l that
plane k maps onto x_r, x_l = (x_r + B y + C) / (1 - A). The nearest surface (largest
disparity) wins where several planes project to the same right pixel.
"""

import typing
from dataclasses import dataclass

import numpy as np

from ..imaging.features import N_HEIGHT_LEVELS, monocular_features
from ..imaging.image import Image
from ..imaging.segmentation import Segmentation, relabel_dense
from ..inference.mcmc import RngStream, as_stream
from ..stereo.planes import plane_disparity
from .textures import random_segment_texture, smooth_noise_texture

DEFAULT_PLANES = np.array(
    [
        [0.02, 0.0, 6.0],
        [0.0, 0.03, 9.0],
        [-0.02, 0.01, 5.0],
        [0.0, 0.0, 11.0],
    ]
)


@dataclass
class StereoScene:
    """
    Attributes:
        left, right (Image): rendered pair
        disparity (np.ndarray): (H, W) true left disparity
        surfaces (np.ndarray): (P, 3) planes of the scene
        surface_labels (np.ndarray): (H, W) plane index of every left pixel
        segmentation (Segmentation): block superpixels that never cross a plane boundary
        planes (np.ndarray): (S, 3) true plane of every superpixel
    """

    left: Image
    right: Image
    disparity: np.ndarray
    surfaces: np.ndarray
    surface_labels: np.ndarray
    segmentation: Segmentation
    planes: np.ndarray


def quadrant_labels(height: int, width: int) -> np.ndarray:
    ys, xs = np.indices((height, width))
    return (ys >= height // 2).astype(int) * 2 + (xs >= width // 2).astype(int)


def block_segmentation(surface_labels: np.ndarray, block: int) -> Segmentation:
    """Square blocks split along surface boundaries"""
    height, width = surface_labels.shape
    ys, xs = np.indices((height, width))
    blocks = (ys // block) * ((width + block - 1) // block) + xs // block
    return Segmentation(relabel_dense(blocks * (surface_labels.max() + 1) + surface_labels))


def _sample_row(texture: np.ndarray, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    width = texture.shape[1]
    x = np.clip(x, 0.0, width - 1)
    x0 = np.minimum(np.floor(x).astype(int), width - 1)
    x1 = np.minimum(x0 + 1, width - 1)
    t = (x - x0)[..., None]
    return (1 - t) * texture[y, x0] + t * texture[y, x1]


def render_right(
    textures: typing.Sequence[np.ndarray], surfaces: np.ndarray, surface_labels: np.ndarray
) -> np.ndarray:
    """
    Right view of textured planes. textures[k] is (H, W', C) with W' covering every
    left column a right pixel can map to.
    """
    height, width = surface_labels.shape
    ys, xs = np.indices((height, width))
    best_d = np.full((height, width), -np.inf)
    best_k = np.full((height, width), -1)
    best_x = np.zeros((height, width))
    for k, (a, b, c) in enumerate(surfaces):
        x_left = (xs + b * ys + c) / (1.0 - a)
        column = np.clip(np.rint(x_left).astype(int), 0, width - 1)
        owner = surface_labels[ys, column] == k
        d = x_left - xs
        wins = owner & (d > best_d)
        best_d = np.where(wins, d, best_d)
        best_k = np.where(wins, k, best_k)
        best_x = np.where(wins, x_left, best_x)

    holes = best_k < 0
    if np.any(holes):
        # gaps between surfaces show the farthest plane
        far = int(np.argmin(surfaces[:, 2]))
        a, b, c = surfaces[far]
        best_k[holes] = far
        best_x[holes] = ((xs + b * ys + c) / (1.0 - a))[holes]

    channels = textures[0].shape[2]
    image = np.zeros((height, width, channels))
    for k in range(len(surfaces)):
        mask = best_k == k
        image[mask] = _sample_row(textures[k], ys[mask], best_x[mask])
    return image


def render_plane_scene(
    height: int = 48,
    width: int = 64,
    surfaces: np.ndarray = None,
    surface_labels: np.ndarray = None,
    block: int = 8,
    rng: RngStream = None,
    textures: typing.Sequence[np.ndarray] = None,
) -> StereoScene:
    """
    Piecewise-planar scene, by default four planes on the image quadrants with one
    shared smooth color texture.
    """
    rng = as_stream(rng)
    surfaces = DEFAULT_PLANES if surfaces is None else np.asarray(surfaces, dtype=float)
    if surface_labels is None:
        surface_labels = quadrant_labels(height, width)
    ys, xs = np.indices((height, width))
    disparity = plane_disparity(surfaces[surface_labels], xs, ys)
    margin = int(np.ceil(max(disparity.max(), 0.0))) + 4
    if textures is None:
        shared = smooth_noise_texture((height, width + margin), 3, rng.child(0))
        textures = [shared] * len(surfaces)

    left = np.zeros((height, width, textures[0].shape[2]))
    for k in range(len(surfaces)):
        mask = surface_labels == k
        left[mask] = textures[k][:, :width][mask]
    right = render_right(textures, surfaces, surface_labels)

    segmentation = block_segmentation(surface_labels, block)
    planes = np.zeros((segmentation.n_segments, 3))
    for i in range(segmentation.n_segments):
        py, px = segmentation.pixels(i)
        planes[i] = surfaces[surface_labels[py[0], px[0]]]
    return StereoScene(
        Image(left), Image(right), disparity, surfaces, surface_labels, segmentation, planes
    )


def tilt_compression(b: float, scale: float = 20.0) -> float:
    """Vertical texture compression factor cos Ψ shown by a plane with vertical slope b"""
    return 1.0 / (1.0 + scale * abs(b))


def render_textured_corpus(
    n_pairs: int = 10,
    height: int = 48,
    width: int = 64,
    rng: RngStream = None,
    block: int = 8,
    texture_cue: bool = True,
) -> typing.List[StereoScene]:
    """
    Four-plane scenes with random slopes. With texture_cue, each plane carries line
    segments foreshortened according to its vertical slope B >= 0, so the HOG of
    a region carries information about B.
    """
    rng = as_stream(rng)
    scenes = []
    for n in range(n_pairs):
        stream = rng.child(n)
        surfaces = np.stack(
            [
                stream.uniform(-0.03, 0.03, 4),
                stream.uniform(0.0, 0.06, 4),
                stream.uniform(3.0, 10.0, 4),
            ],
            axis=1,
        )
        margin = int(np.ceil(surfaces[:, 0].max() * width + surfaces[:, 1].max() * height + surfaces[:, 2].max())) + 6
        textures = []
        for k in range(4):
            color = smooth_noise_texture((height, width + margin), 3, stream.child(1, k))
            if texture_cue:
                segments = random_segment_texture(
                    (height, width + margin),
                    np.arccos(tilt_compression(surfaces[k, 1])),
                    n_segments=int(0.4 * height * (width + margin) / 8),
                    length=12.0,
                    rng=stream.child(2, k),
                    blur=1.0,
                )
                color = 0.5 * color + 0.5 * segments[:, :, None]
            textures.append(color)
        scenes.append(
            render_plane_scene(height, width, surfaces, None, block, stream, textures)
        )
    return scenes


# Index of the first chroma mean at the coarsest scale in a color monocular feature vector
COARSE_CHROMA_FEATURE = 2 * 17 + 15


def mono_weights(dimension: int, n_levels: int, slope: float = 2.0) -> np.ndarray:
    """
    Weights of a synthetic monocular law: disparity grows by 0.1 per height level
    around 6 and follows the coarse chroma feature with the given slope.
    """
    w = np.zeros((n_levels, dimension))
    w[:, -1] = 6.0 + 0.1 * np.arange(n_levels)
    w[:, COARSE_CHROMA_FEATURE] = slope
    return w


def render_mono_corpus(
    n_pairs: int = 10,
    height: int = 48,
    width: int = 64,
    d_max: int = 16,
    rng: RngStream = None,
    w: np.ndarray = None,
) -> typing.Tuple[typing.List[tuple], np.ndarray]:
    """
    Pairs whose left disparity is the rounded monocular prediction w·X(p) of the
    left image, so a known law links appearance and depth. The right view is the
    left view forward-shifted by the integer disparities, disoccluded pixels take
    fresh texture.

    Return:
        list of (left, right, disparity) and the weights used
    """
    rng = as_stream(rng)
    pairs = []
    for n in range(n_pairs):
        stream = rng.child(n)
        detail = smooth_noise_texture((height, width), 3, stream.child(0), sigma=1.2)
        coarse = smooth_noise_texture((height, width), 3, stream.child(1), sigma=6.0)
        left = Image(0.5 * detail + 0.5 * coarse)
        features = monocular_features(left)
        if w is None:
            w = mono_weights(features.dimension, N_HEIGHT_LEVELS)
        prediction = np.einsum("hwd,hwd->hw", features.features, w[features.height_level])
        disparity = np.clip(np.rint(prediction), 0, d_max)

        ys, xs = np.indices((height, width))
        right = smooth_noise_texture((height, width), 3, stream.child(2), sigma=1.2)
        depth = np.full((height, width), -np.inf)
        target = (xs - disparity).astype(int)
        order = np.argsort(disparity, axis=None, kind="stable")
        for flat in order:
            y, x = divmod(int(flat), width)
            tx = target[y, x]
            if 0 <= tx < width and disparity[y, x] >= depth[y, tx]:
                depth[y, tx] = disparity[y, x]
                right[y, tx] = left.data[y, x]
        pairs.append((left, Image(right), disparity))
    return pairs, w
