"""
Rendered stereo sequences of fronto-parallel textured rectangles approaching a
stereo rig along the optical axis.

The left camera sits at the origin looking down +Z with focal length f and the
principal point at the image center; the right camera is shifted by the baseline
h along +X, so a surface at depth z has disparity f h / z. Between t and t+1 each
object comes closer by its own Δz, which keeps the focus of expansion at the
principal point for every object.
"""

import typing
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..imaging.image import Image
from ..imaging.segmentation import Segmentation
from ..inference.mcmc import RngStream, as_stream
from .stereo_scenes import block_segmentation
from .textures import smooth_noise_texture


@dataclass
class MotionObject:
    """
    Attributes:
        x_range, y_range (tuple of float): extent in world units at the object's depth
        depth (float): Z at time t
        depth_change (float): Δz, positive when approaching
    """

    x_range: typing.Tuple[float, float]
    y_range: typing.Tuple[float, float]
    depth: float
    depth_change: float = 0.0


@dataclass
class MotionScene:
    """
    Attributes:
        left_t, right_t, left_t1, right_t1 (Image): the four views
        disparity (np.ndarray): (H, W) left disparity at t
        velocity (np.ndarray): (H, W) true v of every left pixel at t
        object_labels (np.ndarray): (H, W) object index of every left pixel at t
        segmentation (Segmentation): block superpixels within objects
        planes (np.ndarray): (S, 3) true fronto-parallel plane of every superpixel
        velocities (np.ndarray): (S,) true v of every superpixel
        epipole (np.ndarray): focus of expansion
        focal, baseline (float): camera constants
    """

    left_t: Image
    right_t: Image
    left_t1: Image
    right_t1: Image
    disparity: np.ndarray
    velocity: np.ndarray
    object_labels: np.ndarray
    segmentation: Segmentation
    planes: np.ndarray
    velocities: np.ndarray
    epipole: np.ndarray
    focal: float
    baseline: float


def default_objects(height: int, width: int, focal: float) -> typing.List[MotionObject]:
    """A static background wall and two boxes, one approaching and one static"""
    half_w = width / 2.0
    half_h = height / 2.0
    wall = 10.0
    box = 4.0
    return [
        MotionObject((-2 * half_w * wall / focal, 2 * half_w * wall / focal), (-2 * half_h * wall / focal, 2 * half_h * wall / focal), wall, 0.0),
        MotionObject((-0.9 * half_w * box / focal, -0.1 * half_w * box / focal), (-0.6 * half_h * box / focal, 0.6 * half_h * box / focal), box, 0.4),
        MotionObject((0.15 * half_w * 6.0 / focal, 0.85 * half_w * 6.0 / focal), (-0.5 * half_h * 6.0 / focal, 0.5 * half_h * 6.0 / focal), 6.0, 0.0),
    ]


def _object_textures(objects, focal: float, rng: RngStream, sigma: float) -> typing.List[np.ndarray]:
    textures = []
    for k, obj in enumerate(objects):
        texel = obj.depth / focal
        rows = int(np.ceil((obj.y_range[1] - obj.y_range[0]) / texel)) + 2
        cols = int(np.ceil((obj.x_range[1] - obj.x_range[0]) / texel)) + 2
        textures.append(smooth_noise_texture((rows, cols), 3, rng.child(k), sigma=sigma))
    return textures


def render_view(
    objects: typing.Sequence[MotionObject],
    textures: typing.Sequence[np.ndarray],
    shape: typing.Tuple[int, int],
    focal: float,
    camera_x: float = 0.0,
    time: int = 0,
) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Ray-casts every pixel against the rectangles at the given time step.

    Return:
        (H, W, 3) image, (H, W) depth and (H, W) object index, -1 where nothing is hit
    """
    height, width = shape
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    ys, xs = np.indices(shape, dtype=float)
    image = np.zeros((height, width, 3))
    depth = np.full(shape, np.inf)
    owner = np.full(shape, -1)
    for k, obj in enumerate(objects):
        z = obj.depth - time * obj.depth_change
        world_x = (xs - cx) * z / focal + camera_x
        world_y = (ys - cy) * z / focal
        hit = (
            (world_x >= obj.x_range[0])
            & (world_x <= obj.x_range[1])
            & (world_y >= obj.y_range[0])
            & (world_y <= obj.y_range[1])
            & (z < depth)
        )
        if not np.any(hit):
            continue
        texel = obj.depth / focal
        coordinates = np.stack(
            [(world_y[hit] - obj.y_range[0]) / texel, (world_x[hit] - obj.x_range[0]) / texel]
        )
        for c in range(3):
            image[..., c][hit] = ndimage.map_coordinates(textures[k][..., c], coordinates, order=1, mode="nearest")
        depth[hit] = z
        owner[hit] = k
    return image, depth, owner


def render_motion_scene(
    height: int = 48,
    width: int = 64,
    focal: float = 50.0,
    baseline: float = 0.4,
    objects: typing.Sequence[MotionObject] = None,
    block: int = 8,
    rng: RngStream = None,
    texture_sigma: float = 1.5,
) -> MotionScene:
    """
    Left and right views at t and t+1 of rectangles moving along the optical axis,
    with ground-truth disparity and velocity at t.
    """
    rng = as_stream(rng)
    objects = list(objects) if objects is not None else default_objects(height, width, focal)
    textures = _object_textures(objects, focal, rng, texture_sigma)
    shape = (height, width)
    left_t, depth, owner = render_view(objects, textures, shape, focal, 0.0, 0)
    right_t, _, _ = render_view(objects, textures, shape, focal, baseline, 0)
    left_t1, _, _ = render_view(objects, textures, shape, focal, 0.0, 1)
    right_t1, _, _ = render_view(objects, textures, shape, focal, baseline, 1)

    missing = owner < 0
    owner = np.where(missing, 0, owner)
    depth = np.where(missing, objects[0].depth, depth)
    disparity = focal * baseline / depth
    dz = np.array([obj.depth_change for obj in objects])
    velocity = dz[owner] / (focal * baseline)

    segmentation = block_segmentation(owner, block)
    planes = np.zeros((segmentation.n_segments, 3))
    velocities = np.zeros(segmentation.n_segments)
    for i in range(segmentation.n_segments):
        py, px = segmentation.pixels(i)
        planes[i, 2] = disparity[py[0], px[0]]
        velocities[i] = velocity[py[0], px[0]]
    epipole = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
    return MotionScene(
        Image(left_t),
        Image(right_t),
        Image(left_t1),
        Image(right_t1),
        disparity,
        velocity,
        owner,
        segmentation,
        planes,
        velocities,
        epipole,
        focal,
        baseline,
    )
