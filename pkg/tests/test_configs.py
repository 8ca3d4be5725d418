import json

import numpy as np
import pytest

from pbpvision.configs import (
    CONFIG_ENV,
    DEFAULT_SEED,
    DEFAULTS,
    SEEDED_COMMANDS,
    Config,
    get_motion_params,
    get_plane_config,
    get_seed,
    get_segmenter,
    get_stereo_params,
    get_train_config,
    load_config,
)
from pbpvision.errors import ConfigError, DataError
from pbpvision.imaging.image import Image
from pbpvision.learning.params import save_params
from pbpvision.stereo.energy import StereoEnergyParams


def test_defaults_are_copied():
    config = Config()
    config["stereo"]["d_max"] = 3
    assert DEFAULTS["stereo"]["d_max"] == 16
    assert Config()["stereo"]["d_max"] == 16


def test_partial_block_override():
    config = Config({"seed": 7, "stereo": {"rounds": 2}})
    assert config["seed"] == 7
    assert config["stereo"]["rounds"] == 2
    assert config["stereo"]["d_max"] == 16


@pytest.mark.parametrize(
    "values",
    [
        {"bogus": 1},
        {"stereo": {"bogus": 1}},
        {"stereo": 3},
        {"seed": True},
        {"seed": "42"},
        {"threads": 0},
        [1, 2],
    ],
)
def test_invalid_documents(values):
    with pytest.raises(ConfigError):
        Config(values)


def test_dump_and_load(tmp_path):
    config = Config({"seed": 3, "motion": {"focal": 50.0}})
    path = tmp_path / "nested" / "config.json"
    config.dump(path)
    assert json.loads(path.read_text())["seed"] == 3
    assert Config.load(path).values == config.values


def test_unreadable_config_files(tmp_path):
    with pytest.raises(DataError):
        Config.load(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{seed: 1")
    with pytest.raises(ConfigError):
        Config.load(broken)


def test_config_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "env.json"
    path.write_text(json.dumps({"seed": 11}))
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config()["seed"] == 11
    monkeypatch.delenv(CONFIG_ENV)
    assert load_config()["seed"] is None


def test_training_commands_need_a_seed():
    assert get_seed(Config(), "bp-bench") == DEFAULT_SEED
    assert get_seed(Config({"seed": 9}), "train") == 9
    for command in SEEDED_COMMANDS:
        with pytest.raises(ConfigError, match="needs a seed"):
            get_seed(Config(), command)


def test_segmenters():
    image = Image(np.zeros((16, 16)))
    assert get_segmenter("blocks", Config())(image).n_segments == 4
    assert get_segmenter("fh", Config())(image).n_segments >= 1
    with pytest.raises(ConfigError):
        get_segmenter("watershed", Config())


def test_plane_config_from_blocks():
    config = Config({"stereo": {"rounds": 2, "n_candidates": 5}, "bp": {"schedule": "tree"}})
    plane_config = get_plane_config(config)
    assert plane_config.rounds == 2
    assert plane_config.n_candidates == 5
    assert plane_config.schedule == "tree"
    with pytest.raises(ConfigError):
        get_plane_config(Config({"bp": {"schedule": "random"}}))


def test_stereo_params_prefer_the_learned_file(tmp_path):
    assert get_stereo_params(Config({"stereo": {"lambda_s": 3.0}})).lambda_s == 3.0
    path = tmp_path / "params.json"
    save_params(StereoEnergyParams(lambda_s=9.0), path)
    assert get_stereo_params(Config({"paths": {"params": str(path)}})).lambda_s == 9.0


def test_train_mode_is_checked():
    assert get_train_config(Config({"learn": {"mode": "supervised"}})).mode == "supervised"
    with pytest.raises(ConfigError):
        get_train_config(Config({"learn": {"mode": "other"}}))


def test_motion_params_share_the_stereo_weights():
    stereo = StereoEnergyParams()
    params = get_motion_params(Config({"motion": {"n_labels": 8}}), stereo)
    np.testing.assert_array_equal(params.match_weights, stereo.match_weights)
    assert len(params.labels) == 8
    assert params.kappa_border == stereo.kappa_border
