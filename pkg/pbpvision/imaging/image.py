import logging
import os
import typing

import cv2
import numpy as np

from ..errors import (
    DataError,
    DegenerateChannelError,
    DimensionMismatchError,
    MalformedImageError,
)

logger = logging.getLogger(__name__)

LUMINANCE = np.array([0.299, 0.587, 0.114])


class Image:
    """
    Intensity grid of shape (height, width, channels) with channels 1 or 3.

    Attributes:
        data (np.ndarray): float intensities, in [0, 1] for loaded images
    """

    def __init__(self, data):
        data = np.asarray(data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DimensionMismatchError(f"Unsupported image shape {data.shape}")
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self.data.shape[:2]

    @property
    def mean(self) -> np.ndarray:
        return self.data.mean(axis=(0, 1))

    @property
    def std(self) -> np.ndarray:
        return self.data.std(axis=(0, 1))

    def gray(self) -> np.ndarray:
        """Luminance plane of shape (height, width)"""
        if self.channels == 1:
            return self.data[:, :, 0].copy()
        return self.data @ LUMINANCE

    def as_rgb(self) -> "Image":
        if self.channels == 3:
            return self
        return Image(np.repeat(self.data, 3, axis=2))

    def copy(self) -> "Image":
        return Image(self.data.copy())

    def __repr__(self):
        return f"Image({self.width}x{self.height}x{self.channels})"


def bias_gain_normalize(image: Image, strict: bool = True) -> Image:
    """
    Per channel, subtracts the mean and divides by the standard deviation.

    Args:
        image (Image): input image
        strict (bool): raise on a constant channel; when False such channels are
            only centered

    Return:
        normalized image with zero mean and unit deviation per channel
    """
    mean = image.mean
    std = image.std
    degenerate = std <= 1e-12
    if np.any(degenerate):
        if strict:
            raise DegenerateChannelError("Cannot normalize a constant channel")
        std = np.where(degenerate, 1.0, std)
    return Image((image.data - mean) / std)


# Netpbm images go through OpenCV; PFM has its own codec


def _check_readable(path):
    if not os.path.isfile(path):
        raise DataError(f"Cannot read {path}: no such file")


def _ensure_directory(path):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)


def _read_netpbm(path) -> np.ndarray:
    """(H, W, C) raster as stored, RGB order for color files"""
    _check_readable(path)
    raster = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raster is None:
        raise MalformedImageError(f"Cannot decode {path}")
    if raster.dtype not in (np.uint8, np.uint16):
        raise MalformedImageError(f"Unsupported pixel type {raster.dtype} in {path}")
    if raster.ndim == 2:
        return raster[:, :, None]
    if raster.shape[2] != 3:
        raise MalformedImageError(f"Unsupported channel count {raster.shape[2]} in {path}")
    return cv2.cvtColor(raster, cv2.COLOR_BGR2RGB)


def _write_netpbm(raster: np.ndarray, path):
    _ensure_directory(path)
    if raster.shape[2] == 3:
        raster = cv2.cvtColor(raster, cv2.COLOR_RGB2BGR)
    else:
        raster = raster[:, :, 0]
    try:
        written = cv2.imwrite(os.fspath(path), np.ascontiguousarray(raster))
    except cv2.error as error:
        raise DataError(f"Cannot write {path}: {error}") from error
    if not written:
        raise DataError(f"Cannot write {path}")


def load_image(path) -> Image:
    """
    Loads a binary PGM (P5) or PPM (P6) file, mapping 8-bit intensities to [0, 1]
    by dividing by 255 and 16-bit ones by dividing by 65535.
    """
    raster = _read_netpbm(path)
    return Image(raster.astype(float) / np.iinfo(raster.dtype).max)


def save_image(image: Image, path, maxval: int = 255):
    """Writes P5 for one channel and P6 for three channels, 16 bit when maxval > 255"""
    dtype = np.uint8 if maxval < 256 else np.uint16
    values = np.rint(np.clip(image.data, 0.0, 1.0) * np.iinfo(dtype).max).astype(dtype)
    _write_netpbm(values, path)


def load_label_map(path) -> np.ndarray:
    """Raw integer values of a P5 label map (8 or 16 bit)"""
    raster = _read_netpbm(path)
    if raster.shape[2] != 1:
        raise MalformedImageError(f"Label map {path} must be single channel")
    return raster[:, :, 0].astype(np.int64)


def save_label_map(labels: np.ndarray, path):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise DataError("Label values must fit in 16 bits")
    _write_netpbm(labels.astype(np.uint16)[:, :, None], path)


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as error:
        raise DataError(f"Cannot read {path}: {error}") from error


def _parse_header(buffer: bytes, n_fields: int) -> typing.Tuple[typing.List[bytes], int]:
    """Reads whitespace separated header tokens"""
    tokens = []
    position = 0
    while len(tokens) < n_fields:
        while position < len(buffer) and buffer[position : position + 1].isspace():
            position += 1
        if position >= len(buffer):
            raise MalformedImageError("Header ended early")
        start = position
        while position < len(buffer) and not buffer[position : position + 1].isspace():
            position += 1
        tokens.append(buffer[start:position])
    if position >= len(buffer):
        raise MalformedImageError("No pixel data after header")
    # a single whitespace byte separates header and raster
    return tokens, position + 1


def save_pfm(array: np.ndarray, path):
    """Little-endian PFM (scale -1.0), rows stored bottom to top"""
    array = np.asarray(array, dtype=float)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    magic = "PF" if array.ndim == 3 else "Pf"
    header = f"{magic}\n{array.shape[1]} {array.shape[0]}\n-1.0\n".encode()
    _ensure_directory(path)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.flipud(array).astype("<f4").tobytes())


def load_pfm(path) -> np.ndarray:
    buffer = _read_bytes(path)
    tokens, offset = _parse_header(buffer, 4)
    magic = tokens[0]
    if magic not in (b"Pf", b"PF"):
        raise MalformedImageError(f"Unsupported PFM magic {magic!r} in {path}")
    try:
        width, height = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError as error:
        raise MalformedImageError(f"Bad PFM header in {path}") from error
    channels = 1 if magic == b"Pf" else 3
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height * channels
    if len(buffer) - offset < count * 4:
        raise MalformedImageError(f"Truncated PFM raster in {path}")
    raster = np.frombuffer(buffer, dtype=dtype, count=count, offset=offset).astype(float)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(raster.reshape(shape)).copy()
