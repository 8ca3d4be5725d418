from .textures import random_segment_texture, smooth_noise_texture
from .stereo_scenes import (
    DEFAULT_PLANES,
    StereoScene,
    block_segmentation,
    mono_weights,
    quadrant_labels,
    render_mono_corpus,
    render_plane_scene,
    render_textured_corpus,
    tilt_compression,
)
from .motion_scenes import MotionObject, MotionScene, default_objects, render_motion_scene
from .graphs import bench_graphs, chain_graph, random_tree_graph
