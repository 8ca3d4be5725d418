import json
import logging
import os

import numpy as np

from ..errors import ConfigError, DataError
from ..stereo.energy import BETA_Y_NAMES, StereoEnergyParams

logger = logging.getLogger(__name__)

# Learning-rate multipliers of the CD-trained parameters, in BETA_Y_NAMES order. The
# texture weights multiply squared slope residuals, which are orders of magnitude
# smaller than the disparity gaps of the smoothness term.
BLOCK_SCALE = np.array([1.0, 100.0, 1000.0, 1000.0])

# Parameter blocks of the JSON file
BLOCKS = {
    "match": ["match_weights", "kappa_border"],
    "smoothness": ["lambda_s", "tau_s"],
    "texture": ["lambda_a", "lambda_b", "tau_t", "beta_a", "beta_b"],
}


def initial_params(texture: bool = True) -> StereoEnergyParams:
    """λ_k = 1, λ_S = 2, τ_S = 200, β_A = β_B = 0, λ_A = λ_B = 0.5 (0 without texture)"""
    params = StereoEnergyParams()
    if not texture:
        params.lambda_a = 0.0
        params.lambda_b = 0.0
    return params


def params_to_blocks(params: StereoEnergyParams) -> dict:
    values = params.to_dict()
    return {block: {name: values[name] for name in names} for block, names in BLOCKS.items()}


def params_from_blocks(blocks: dict) -> StereoEnergyParams:
    unknown = set(blocks) - set(BLOCKS)
    if unknown:
        raise ConfigError(f"Unknown parameter blocks {sorted(unknown)}")
    values = {}
    for block, entries in blocks.items():
        extra = set(entries) - set(BLOCKS[block])
        if extra:
            raise ConfigError(f"Unknown entries {sorted(extra)} in block {block}")
        values.update(entries)
    return StereoEnergyParams.from_dict(values)


def save_params(params: StereoEnergyParams, path):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump(params_to_blocks(params), f, indent=2)


def load_params(path) -> StereoEnergyParams:
    try:
        with open(path) as f:
            blocks = json.load(f)
    except OSError as error:
        raise DataError(f"Cannot read {path}: {error}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path} is not valid JSON: {error}") from error
    return params_from_blocks(blocks)


def describe(params: StereoEnergyParams) -> str:
    return ", ".join(f"{name}={getattr(params, name):.4g}" for name in BETA_Y_NAMES)
