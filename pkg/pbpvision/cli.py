import argparse
import logging
import os
import sys
import typing

import numpy as np
import pandas as pd

from .configs import (
    OPTIONS_SCHEDULES,
    OPTIONS_SEGMENTERS,
    OPTIONS_TRAIN_MODES,
    Config,
    get_base_parser,
    get_mde_params,
    get_motion_params,
    get_plane_config,
    get_schedule,
    get_seed,
    get_segmenter,
    get_stereo_params,
    get_train_config,
    load_config,
)
from .errors import ConfigError, DataError
from .imaging.image import Image, load_image, load_pfm, save_image, save_pfm
from .imaging.segmentation import load_segmentation, save_segmentation
from .inference.mcmc import RngStream
from .inference.oracle import oracle_bench
from .learning.hard_em import train
from .learning.params import save_params
from .mde.baseline import rms_disparity
from .mde.corpus import StereoPair, load_corpus, load_pair, save_metrics
from .mde.model import bootstrap_em, monocular_infer
from .mde.view import view_prediction_error
from .motion.pipeline import ERROR_COLUMNS, FrameQuad, alternate, predict_fourth_view
from .sfm.benchmark import run_comparison
from .sfm.scene import save_results
from .stereo.inference import infer_planes
from .stereo.planes import disparity_from_planes, save_planes
from .synthetic.graphs import bench_graphs
from .synthetic.motion_scenes import render_motion_scene
from .synthetic.stereo_scenes import render_mono_corpus, render_textured_corpus

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _sibling(path: str, suffix: str) -> str:
    return os.path.splitext(path)[0] + suffix


def _ensure_parent(path: str):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)


def _segment_all(pairs: typing.Sequence[StereoPair], config: Config):
    segmenter = get_segmenter(config["segment"]["method"], config)
    for pair in pairs:
        if pair.segmentation is None:
            pair.segmentation = segmenter(pair.left)


def _stereo_corpus(directory, n_synthetic, rng: RngStream) -> typing.List[StereoPair]:
    if directory:
        return load_corpus(directory)
    if n_synthetic:
        scenes = render_textured_corpus(n_synthetic, rng=rng)
        return [StereoPair.from_scene(f"synthetic{n:03d}", scene) for n, scene in enumerate(scenes)]
    return []


def run_stereo(args, config: Config) -> int:
    left = load_image(args.left)
    right = load_image(args.right)
    gt = load_pfm(args.gt) if args.gt else None
    if args.segmentation:
        segmentation = load_segmentation(args.segmentation, left.shape)
    else:
        segmentation = get_segmenter(config["segment"]["method"], config)(left)
    params = get_stereo_params(config)

    result = infer_planes(
        left,
        right,
        segmentation,
        params,
        get_plane_config(config),
        RngStream(get_seed(config, args.command)),
        progress=args.progress,
    )
    disparity = disparity_from_planes(segmentation, result.planes)
    row = {
        "pair": os.path.basename(args.left),
        "distortion": view_prediction_error(left, right, disparity),
        "rms": rms_disparity(disparity, gt) if gt is not None else float("nan"),
    }

    _ensure_parent(args.out)
    save_pfm(disparity, args.out)
    save_planes(result.planes, args.planes or _sibling(args.out, "_planes.csv"))
    save_metrics([row], args.metrics or _sibling(args.out, "_metrics.csv"))
    logger.info(f"Energy {result.energy_history[0]:.3f} -> {result.energy:.3f}, distortion {row['distortion']:.4f}")
    return EXIT_OK


def run_segment(args, config: Config) -> int:
    image = load_image(args.image)
    segmentation = get_segmenter(config["segment"]["method"], config)(image)
    _ensure_parent(args.out)
    save_segmentation(segmentation, args.out)
    logger.info(f"{segmentation.n_segments} segments written to {args.out}")
    return EXIT_OK


def run_train(args, config: Config) -> int:
    rng = RngStream(get_seed(config, args.command))
    corpus = _stereo_corpus(args.corpus, args.synthetic, rng.child(1))
    if not corpus:
        raise ConfigError("train needs --corpus or --synthetic")
    holdout = _stereo_corpus(args.holdout, args.holdout_synthetic, rng.child(2))
    _segment_all(list(corpus) + list(holdout), config)

    train_config = get_train_config(config)
    params = get_stereo_params(config)
    if not train_config.texture:
        params.lambda_a = params.lambda_b = 0.0
    _ensure_parent(args.out)
    trained, state, _ = train(
        corpus,
        params,
        train_config,
        rng.child(0),
        holdout,
        log_path=args.log or _sibling(args.out, "_log.csv"),
        use_wandb=args.wandb,
        progress=args.progress,
        threads=config["threads"],
    )
    save_params(trained, args.out)
    logger.info(f"Trained for {state.iteration} iterations, parameters written to {args.out}")
    return EXIT_OK


def run_mde(args, config: Config) -> int:
    rng = RngStream(get_seed(config, args.command))
    params = get_mde_params(config)
    if args.corpus:
        corpus = load_corpus(args.corpus)
    elif args.synthetic:
        pairs, _ = render_mono_corpus(args.synthetic, d_max=params.d_max, rng=rng.child(1))
        corpus = [StereoPair(f"mono{n:03d}", *pair) for n, pair in enumerate(pairs)]
    else:
        raise ConfigError("mde needs --corpus or --synthetic")

    params, history = bootstrap_em(corpus, params, config["mde"]["iters"], progress=args.progress)
    rows, disparities = [], []
    for pair in corpus:
        d = monocular_infer(pair.left, params)
        disparities.append(d)
        rows.append(
            {
                "pair": pair.name,
                "distortion": view_prediction_error(pair.left, pair.right, d),
                "rms": rms_disparity(d, pair.disparity) if pair.disparity is not None else float("nan"),
            }
        )

    os.makedirs(args.out, exist_ok=True)
    for pair, d in zip(corpus, disparities):
        save_pfm(d.astype(float), os.path.join(args.out, f"{pair.name}.pfm"))
    save_metrics(rows, os.path.join(args.out, "metrics.csv"))
    pd.DataFrame({"half_step": np.arange(1, len(history) + 1), "objective": history}).to_csv(
        os.path.join(args.out, "objective.csv"), index=False
    )
    if params.w is not None:
        np.save(os.path.join(args.out, "mono_weights.npy"), params.w)
    return EXIT_OK


def _load_sequence(directory: str) -> typing.List[typing.Tuple[str, FrameQuad]]:
    """Consecutive pair folders of a sequence directory form the frame quads"""
    if not os.path.isdir(directory):
        raise DataError(f"Sequence directory {directory} does not exist")
    folders = sorted(entry.path for entry in os.scandir(directory) if entry.is_dir())
    if len(folders) < 2:
        raise DataError(f"Sequence {directory} needs at least two frame folders")
    pairs = [load_pair(folder) for folder in folders]
    return [
        (pairs[k].name, FrameQuad(pairs[k].left, pairs[k].right, pairs[k + 1].left, pairs[k + 1].right))
        for k in range(len(pairs) - 1)
    ]


def run_motion(args, config: Config) -> int:
    rng = RngStream(get_seed(config, args.command))
    if args.sequence:
        quads = [(name, quad, None) for name, quad in _load_sequence(args.sequence)]
    else:
        scene = render_motion_scene(rng=rng.child(1))
        quads = [("synthetic", FrameQuad.from_scene(scene), scene.segmentation)]
    stereo_params = get_stereo_params(config)
    motion_params = get_motion_params(config, stereo_params)
    plane_config = get_plane_config(config)
    segmenter = get_segmenter(config["segment"]["method"], config)

    outputs, error_rows = [], []
    for k, (name, quad, segmentation) in enumerate(quads):
        if segmentation is None:
            segmentation = segmenter(quad.left_t)
        result = alternate(
            quad,
            segmentation,
            stereo_params,
            motion_params,
            plane_config,
            config["motion"]["iters"],
            rng.child(0, k),
            epipole=args.epipole,
            progress=args.progress,
        )
        disparity = disparity_from_planes(segmentation, result.planes)
        velocity = result.velocities.per_pixel(segmentation)
        predicted, _ = predict_fourth_view(quad.left_t, disparity, velocity, result.epipole)
        outputs.append((name, result, velocity, predicted))
        for it, error in enumerate(result.error_history):
            error_rows.append({"frame": name, ERROR_COLUMNS[0]: it, ERROR_COLUMNS[1]: error})

    os.makedirs(args.out, exist_ok=True)
    for name, result, velocity, predicted in outputs:
        save_planes(result.planes, os.path.join(args.out, f"{name}_planes.csv"))
        save_pfm(velocity, os.path.join(args.out, f"{name}_velocity.pfm"))
        extension = ".ppm" if predicted.shape[2] == 3 else ".pgm"
        save_image(Image(predicted), os.path.join(args.out, f"{name}_prediction{extension}"))
    pd.DataFrame(error_rows, columns=["frame"] + ERROR_COLUMNS).to_csv(
        os.path.join(args.out, "errors.csv"), index=False
    )
    return EXIT_OK


def run_sfm(args, config: Config) -> int:
    block = config["sfm"]
    frame = run_comparison(
        n_runs=block["runs"],
        n_points=block["n_points"],
        n_cams=block["n_cams"],
        sigma=block["sigma"],
        n_particles=config["pbp"]["n_particles"],
        rounds=config["pbp"]["rounds"],
        focal=block["focal"],
        rng=RngStream(get_seed(config, args.command)),
        progress=args.progress,
        mh_steps=config["mcmc"]["mh_steps"],
        message_iters=config["pbp"]["message_iters"],
        init_spread=config["mcmc"]["init_spread"],
        proposal_spread=config["mcmc"]["proposal_spread"],
        threads=config["threads"],
    )
    save_results(frame.to_dict("records"), args.out)
    return EXIT_OK


def run_bp_bench(args, config: Config) -> int:
    block = config["graph"]
    rng = RngStream(get_seed(config, args.command))
    graphs = bench_graphs(block["n_graphs"], block["max_nodes"], block["max_labels"], rng)
    schedule = get_schedule(config["bp"]["bench_schedule"])
    frame = oracle_bench(graphs, schedule, config["bp"]["max_iters"], block["tol"])
    if args.out:
        _ensure_parent(args.out)
        frame.to_csv(args.out, index=False)
    passed = int(frame["passed"].sum())
    print(f"{passed}/{len(frame)} graphs agree with the oracle")
    if args.oracle and passed < len(frame):
        return EXIT_FAILED
    return EXIT_OK


COMMANDS = {
    "stereo": run_stereo,
    "train": run_train,
    "mde": run_mde,
    "motion": run_motion,
    "sfm-sim": run_sfm,
    "bp-bench": run_bp_bench,
    "segment": run_segment,
}


def _override(parser, flag: str, dest: str, **kwargs):
    """Flag whose value, when given, replaces config key `block.name`"""
    parser.add_argument(flag, dest=dest, default=None, **kwargs)


def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbpvision")
    subparsers = parser.add_subparsers(dest="command", required=True)
    base = get_base_parser()

    stereo = subparsers.add_parser("stereo", parents=[base], help="slanted-plane stereo on one pair")
    stereo.add_argument("--left", required=True)
    stereo.add_argument("--right", required=True)
    stereo.add_argument("--out", required=True, help="disparity PFM")
    stereo.add_argument("--segmentation", default=None, help="16-bit PGM label map")
    stereo.add_argument("--gt", default=None, help="ground-truth disparity PFM")
    stereo.add_argument("--planes", default=None, help="planes CSV, next to --out by default")
    stereo.add_argument("--metrics", default=None, help="metrics CSV, next to --out by default")
    _override(stereo, "--params", "paths.params", help="learned parameter JSON")
    _override(stereo, "--d-max", "stereo.d_max", type=int)
    _override(stereo, "--rounds", "stereo.rounds", type=int)
    _override(stereo, "--n-candidates", "stereo.n_candidates", type=int)
    _override(stereo, "--schedule", "bp.schedule", choices=OPTIONS_SCHEDULES)
    _override(stereo, "--segmenter", "segment.method", choices=OPTIONS_SEGMENTERS)

    train_parser = subparsers.add_parser("train", parents=[base], help="hard EM training of the stereo energy")
    train_parser.add_argument("--corpus", default=None, help="directory of pair folders")
    train_parser.add_argument("--synthetic", type=int, default=0, help="size of a rendered corpus")
    train_parser.add_argument("--holdout", default=None, help="directory of held-out pair folders")
    train_parser.add_argument("--holdout-synthetic", type=int, default=0)
    train_parser.add_argument("--out", required=True, help="parameter JSON")
    train_parser.add_argument("--log", default=None, help="training log CSV")
    _override(train_parser, "--params", "paths.params", help="starting parameter JSON")
    _override(train_parser, "--iters", "learn.iters", type=int)
    _override(train_parser, "--mode", "learn.mode", choices=OPTIONS_TRAIN_MODES)
    _override(train_parser, "--no-texture", "learn.texture", action="store_const", const=False)
    _override(train_parser, "--rounds", "stereo.rounds", type=int)
    _override(train_parser, "--segmenter", "segment.method", choices=OPTIONS_SEGMENTERS)

    mde = subparsers.add_parser("mde", parents=[base], help="bootstrapped monocular depth")
    mde.add_argument("--corpus", default=None)
    mde.add_argument("--synthetic", type=int, default=0)
    mde.add_argument("--out", required=True, help="output directory")
    _override(mde, "--iters", "mde.iters", type=int)
    _override(mde, "--d-max", "mde.d_max", type=int)

    motion = subparsers.add_parser("motion", parents=[base], help="depth and velocity from stereo video")
    motion.add_argument("--sequence", default=None, help="directory of consecutive pair folders")
    motion.add_argument("--out", required=True, help="output directory")
    motion.add_argument("--epipole", type=float, nargs=2, default=None, metavar=("X", "Y"))
    _override(motion, "--params", "paths.params")
    _override(motion, "--iters", "motion.iters", type=int)
    _override(motion, "--n-labels", "motion.n_labels", type=int)
    _override(motion, "--segmenter", "segment.method", choices=OPTIONS_SEGMENTERS)

    sfm = subparsers.add_parser("sfm-sim", parents=[base], help="PBP against the mode baseline on synthetic SfM")
    sfm.add_argument("--out", required=True, help="results CSV")
    _override(sfm, "--runs", "sfm.runs", type=int)
    _override(sfm, "--sigma", "sfm.sigma", type=float)
    _override(sfm, "--points", "sfm.n_points", type=int)
    _override(sfm, "--cams", "sfm.n_cams", type=int)
    _override(sfm, "--particles", "pbp.n_particles", type=int)
    _override(sfm, "--rounds", "pbp.rounds", type=int)

    bench = subparsers.add_parser("bp-bench", parents=[base], help="exact BP on bundled tiny trees")
    bench.add_argument("--oracle", action="store_true", default=False, help="fail unless every graph matches enumeration")
    bench.add_argument("--out", default=None, help="per-graph CSV")
    _override(bench, "--graphs", "graph.n_graphs", type=int)
    _override(bench, "--schedule", "bp.bench_schedule", choices=OPTIONS_SCHEDULES)

    segment = subparsers.add_parser("segment", parents=[base], help="superpixels of one image")
    segment.add_argument("--image", required=True)
    segment.add_argument("--out", required=True, help="16-bit PGM label map")
    _override(segment, "--k", "segment.k", type=float)
    _override(segment, "--min-size", "segment.min_size", type=int)
    _override(segment, "--method", "segment.method", choices=OPTIONS_SEGMENTERS)
    return parser


def build_config(args) -> Config:
    config = load_config(args.config)
    if args.seed is not None:
        config.set("seed", None, args.seed)
    if args.threads is not None:
        config.set("threads", None, args.threads)
    for dest, value in sorted(vars(args).items()):
        if "." in dest and value is not None:
            block, name = dest.split(".", 1)
            config.set(block, name, value)
    return config


def run(argv=None) -> int:
    """Parses argv, runs one subcommand and returns its exit status"""
    parser = get_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return error.code if isinstance(error.code, int) else EXIT_CONFIG

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        config = build_config(args)
        if args.dump_config:
            config.dump(args.dump_config)
        return COMMANDS[args.command](args, config)
    except ConfigError as error:
        print(f"pbpvision {args.command}: configuration error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as error:
        print(f"pbpvision {args.command}: data error: {error}", file=sys.stderr)
        return EXIT_DATA
