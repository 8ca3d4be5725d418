from .image import (
    Image,
    bias_gain_normalize,
    load_image,
    load_pfm,
    save_image,
    save_pfm,
)
from .features import MonocularFeatures, monocular_features, pixel_features
from .hog import global_histogram, hog_pyramid, orientation_ratio, tilt_from_ratio
from .segmentation import Segmentation, fh_segment, load_segmentation, save_segmentation
