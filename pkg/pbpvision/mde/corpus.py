import logging
import os
import typing
from dataclasses import dataclass

import pandas as pd

from ..errors import DataError
from ..imaging.image import Image, load_image, load_pfm
from ..imaging.segmentation import Segmentation

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["pair", "distortion", "rms"]


@dataclass
class StereoPair:
    """
    One rectified pair of a corpus.

    Attributes:
        name (str): pair identifier
        left, right (Image): views
        disparity (np.ndarray or None): ground-truth left disparity, when available
        segmentation (Segmentation or None): superpixels of the left view
    """

    name: str
    left: Image
    right: Image
    disparity: typing.Any = None
    segmentation: typing.Optional[Segmentation] = None

    @classmethod
    def from_scene(cls, name: str, scene) -> "StereoPair":
        return cls(name, scene.left, scene.right, scene.disparity, scene.segmentation)


def _find(folder: str, stem: str, extensions) -> typing.Optional[str]:
    for extension in extensions:
        path = os.path.join(folder, stem + extension)
        if os.path.exists(path):
            return path
    return None


def load_pair(folder: str) -> StereoPair:
    """Reads left/right (.ppm or .pgm) and the optional gt.pfm of a pair folder"""
    left = _find(folder, "left", (".ppm", ".pgm"))
    right = _find(folder, "right", (".ppm", ".pgm"))
    if left is None or right is None:
        raise DataError(f"Pair folder {folder} needs left and right images")
    gt = os.path.join(folder, "gt.pfm")
    disparity = load_pfm(gt) if os.path.exists(gt) else None
    return StereoPair(os.path.basename(os.path.normpath(folder)), load_image(left), load_image(right), disparity)


def load_corpus(directory: str) -> typing.List[StereoPair]:
    """Every sub-folder of `directory`, in name order, is one pair"""
    if not os.path.isdir(directory):
        raise DataError(f"Corpus directory {directory} does not exist")
    folders = sorted(
        entry.path for entry in os.scandir(directory) if entry.is_dir()
    )
    if not folders:
        raise DataError(f"Corpus directory {directory} holds no pair folders")
    pairs = [load_pair(folder) for folder in folders]
    logger.info(f"Loaded {len(pairs)} pairs from {directory}")
    return pairs


def save_metrics(rows: typing.Sequence[dict], path: str):
    """CSV with one (pair, distortion, rms) row per evaluated pair"""
    frame = pd.DataFrame(list(rows), columns=METRIC_COLUMNS)
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    return frame
