import argparse
import copy
import json
import os

import numpy as np
from dotenv import load_dotenv

from .errors import ConfigError, DataError
from .imaging.segmentation import fh_segment
from .inference.bp import MODES, SCHEDULES
from .learning.hard_em import OPTIONS_MODES, TrainConfig
from .learning.params import load_params
from .mde.model import MdeParams
from .motion.velocity import MotionParams
from .stereo.energy import StereoEnergyParams
from .stereo.inference import PlaneInferenceConfig
from .synthetic.stereo_scenes import block_segmentation

CONFIG_ENV = "PBPVISION_CONFIG"

OPTIONS_COMMANDS = ["stereo", "train", "mde", "motion", "sfm-sim", "bp-bench", "segment"]
OPTIONS_SCHEDULES = list(SCHEDULES)
OPTIONS_PBP_MODES = list(MODES)
OPTIONS_TRAIN_MODES = list(OPTIONS_MODES)
OPTIONS_SEGMENTERS = ["fh", "blocks"]
OPTIONS_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
# Commands that learn or estimate from data only run with an explicit seed
SEEDED_COMMANDS = ["train", "mde", "motion"]
DEFAULT_SEED = 42

# One flat block per module; a JSON config may only name keys present here
DEFAULTS = {
    "seed": None,
    "threads": 1,
    "paths": {"params": None},
    "graph": {"n_graphs": 50, "max_nodes": 6, "max_labels": 5, "tol": 1e-10},
    "bp": {"schedule": "synchronous", "max_iters": 100, "bench_schedule": "tree"},
    "mcmc": {"mh_steps": 5, "init_spread": 1.0, "proposal_spread": 1.0},
    "pbp": {"n_particles": 25, "rounds": 5, "message_iters": 2},
    "segment": {"method": "fh", "k": 300.0, "min_size": 50, "sigma": 0.8, "block": 8},
    "stereo": {
        "d_max": 16,
        "sigma_a": 0.007,
        "sigma_b": 0.007,
        "sigma_c": 0.1,
        "n_candidates": 15,
        "rounds": 6,
        "patience": 1,
        "ransac_iters": 200,
        "inlier_tol": 1.0,
        "consistency_tol": 1.0,
        "bp_iters": 50,
        "kappa_border": 6.0,
        "lambda_s": 2.0,
        "tau_s": 200.0,
        "lambda_a": 0.5,
        "lambda_b": 0.5,
        "tau_t": 4.0,
    },
    "learn": {
        "iters": 6,
        "lr": 1e-3,
        "steps": 8,
        "n_samples": 10,
        "mcmc_steps": 1,
        "texture": True,
        "regress": True,
        "ridge": 1e-6,
        "mode": "unsupervised",
    },
    "mde": {"lambda_d": 1.0, "tau_d": 6.0, "lambda_s": 0.5, "tau_s": 4.0, "d_max": 16, "iters": 3},
    "motion": {
        "lambda_v": 2000.0,
        "tau_v": 20.0,
        "n_labels": 64,
        "v_max": None,
        "prior_weight": 1.0,
        "iters": 3,
        "focal": None,
        "baseline": None,
    },
    "sfm": {"runs": 200, "n_points": 10, "n_cams": 3, "sigma": 1.0, "focal": 500.0},
}


class Config:
    """
    Nested parameter document: `seed`, `threads` and one block per module.

    Attributes:
        values (dict): current values, DEFAULTS overridden by a JSON file and flags
    """

    def __init__(self, values: dict = None):
        self.values = copy.deepcopy(DEFAULTS)
        if values:
            self.update(values)

    def update(self, values: dict):
        if not isinstance(values, dict):
            raise ConfigError("A config must be a JSON object")
        for key, value in values.items():
            if key not in DEFAULTS:
                raise ConfigError(f"Unknown config key {key}")
            if isinstance(DEFAULTS[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"Config block {key} must be an object")
                unknown = set(value) - set(DEFAULTS[key])
                if unknown:
                    raise ConfigError(f"Unknown keys {sorted(unknown)} in config block {key}")
                self.values[key].update(value)
            else:
                self.values[key] = value
        self.validate()

    def set(self, block: str, name: str, value):
        self.update({block: {name: value}} if name else {block: value})

    def validate(self):
        seed = self.values["seed"]
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.values["threads"], int) or self.values["threads"] < 1:
            raise ConfigError("threads must be a positive integer")

    def __getitem__(self, block: str):
        return self.values[block]

    @classmethod
    def load(cls, path) -> "Config":
        try:
            with open(path) as f:
                values = json.load(f)
        except OSError as error:
            raise DataError(f"Cannot read config {path}: {error}") from error
        except json.JSONDecodeError as error:
            raise ConfigError(f"Config {path} is not valid JSON: {error}") from error
        return cls(values)

    def dump(self, path):
        directory = os.path.dirname(os.fspath(path))
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.values, f, indent=2, sort_keys=True)
            f.write("\n")


def load_config(path=None) -> Config:
    """The given file, else the file named by PBPVISION_CONFIG, else the defaults"""
    load_dotenv()
    path = path or os.getenv(CONFIG_ENV)
    if path:
        return Config.load(path)
    return Config()


def get_seed(config: Config, command: str) -> int:
    """The configured seed; commands in SEEDED_COMMANDS refuse to run without one"""
    seed = config["seed"]
    if seed is not None:
        return seed
    if command in SEEDED_COMMANDS:
        raise ConfigError(f"{command} needs a seed, set seed in the config or pass --seed")
    return DEFAULT_SEED


def get_schedule(name):
    if name in OPTIONS_SCHEDULES:
        return name
    else:
        raise ConfigError(f"Unknown BP schedule {name}")


def get_segmenter(name, config: Config):
    block = config["segment"]
    if name == "fh":
        return lambda image: fh_segment(image, k=block["k"], min_size=block["min_size"], sigma=block["sigma"])
    elif name == "blocks":
        return lambda image: block_segmentation(np.zeros(image.shape, dtype=int), block["block"])
    else:
        raise ConfigError(f"Unknown segmentation method {name}")


def get_plane_config(config: Config) -> PlaneInferenceConfig:
    block = config["stereo"]
    return PlaneInferenceConfig(
        d_max=block["d_max"],
        sigma_a=block["sigma_a"],
        sigma_b=block["sigma_b"],
        sigma_c=block["sigma_c"],
        n_candidates=block["n_candidates"],
        rounds=block["rounds"],
        patience=block["patience"],
        ransac_iters=block["ransac_iters"],
        inlier_tol=block["inlier_tol"],
        consistency_tol=block["consistency_tol"],
        bp_iters=block["bp_iters"],
        schedule=get_schedule(config["bp"]["schedule"]),
    )


def get_stereo_params(config: Config) -> StereoEnergyParams:
    """Learned parameters from paths.params when set, else the stereo block"""
    if config["paths"]["params"]:
        return load_params(config["paths"]["params"])
    block = config["stereo"]
    return StereoEnergyParams(
        kappa_border=block["kappa_border"],
        lambda_s=block["lambda_s"],
        tau_s=block["tau_s"],
        lambda_a=block["lambda_a"],
        lambda_b=block["lambda_b"],
        tau_t=block["tau_t"],
    )


def get_train_config(config: Config) -> TrainConfig:
    block = config["learn"]
    if block["mode"] not in OPTIONS_TRAIN_MODES:
        raise ConfigError(f"Unknown training mode {block['mode']}")
    return TrainConfig(
        iters=block["iters"],
        lr=block["lr"],
        steps=block["steps"],
        n_samples=block["n_samples"],
        mcmc_steps=block["mcmc_steps"],
        texture=block["texture"],
        regress=block["regress"],
        ridge=block["ridge"],
        mode=block["mode"],
        inference=get_plane_config(config),
    )


def get_mde_params(config: Config) -> MdeParams:
    block = config["mde"]
    return MdeParams(
        lambda_d=block["lambda_d"],
        tau_d=block["tau_d"],
        lambda_s=block["lambda_s"],
        tau_s=block["tau_s"],
        d_max=block["d_max"],
    )


def get_motion_params(config: Config, stereo_params: StereoEnergyParams) -> MotionParams:
    block = config["motion"]
    return MotionParams(
        match_weights=stereo_params.match_weights.copy(),
        kappa_border=stereo_params.kappa_border,
        lambda_v=block["lambda_v"],
        tau_v=block["tau_v"],
        n_labels=block["n_labels"],
        d_max=config["stereo"]["d_max"],
        v_max=block["v_max"],
        prior_weight=block["prior_weight"],
        focal=block["focal"],
        baseline=block["baseline"],
        schedule=get_schedule(config["bp"]["schedule"]),
        bp_iters=config["stereo"]["bp_iters"],
    )


def get_base_parser():
    """Flags shared by every subcommand; pass as a parent parser"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--seed", type=int, default=None, help="random seed, required by train, mde and motion (42 elsewhere)"
    )
    parser.add_argument("--config", type=str, default=None, help=f"JSON config, defaults to ${CONFIG_ENV}")
    parser.add_argument("--dump-config", type=str, default=None, help="write the effective config here")
    parser.add_argument("--log-level", type=str, default="INFO", choices=OPTIONS_LOG_LEVELS)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--wandb", action="store_true", default=False)
    parser.add_argument("--progress", action="store_true", default=False)
    return parser
