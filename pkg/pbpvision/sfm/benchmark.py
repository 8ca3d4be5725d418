import logging
import typing
from multiprocessing import Pool

import pandas as pd
import tqdm

from ..inference.mcmc import RngStream, as_stream
from .baseline import mode_baseline
from .pbp_sfm import sfm_pbp
from .scene import RESULT_COLUMNS, reconstruction_errors, synth_scene

logger = logging.getLogger(__name__)


def compare_run(run: int, rng: RngStream, settings: dict) -> typing.List[dict]:
    """One seeded scene solved by both methods"""
    scene = synth_scene(
        settings["n_points"], settings["n_cams"], settings["sigma"], rng.child(run, 0), settings["focal"]
    )
    posterior = sfm_pbp(
        scene.observations,
        scene.poses,
        scene.points,
        settings["sigma"],
        settings["focal"],
        settings["n_particles"],
        settings["rounds"],
        rng.child(run, 1),
        mh_steps=settings["mh_steps"],
        message_iters=settings["message_iters"],
        init_spread=settings["init_spread"],
        proposal_spread=settings["proposal_spread"],
    )
    rows = []
    pose_err, map_err = reconstruction_errors(scene, posterior.poses, posterior.points)
    rows.append({"run": run, "method": "pbp", "pose_err": pose_err, "map_err": map_err})
    mode = mode_baseline(scene.observations, scene.poses, scene.points, settings["sigma"], settings["focal"])
    pose_err, map_err = reconstruction_errors(scene, mode.poses, mode.points)
    rows.append({"run": run, "method": "mode", "pose_err": pose_err, "map_err": map_err})
    return rows


def _compare_task(task) -> typing.List[dict]:
    run, seed, key, settings = task
    return compare_run(run, RngStream(seed, key), settings)


def run_comparison(
    n_runs: int = 200,
    n_points: int = 10,
    n_cams: int = 3,
    sigma: float = 1.0,
    n_particles: int = 25,
    rounds: int = 5,
    focal: float = 500.0,
    rng: RngStream = None,
    progress: bool = False,
    mh_steps: int = 5,
    message_iters: int = 2,
    init_spread: float = 1.0,
    proposal_spread: float = 1.0,
    threads: int = 1,
) -> pd.DataFrame:
    """
    PBP posterior means against the mode baseline on fresh synthetic scenes, both
    started at the ground truth. Run k draws its scene from rng.child(k, 0) and
    its particles from rng.child(k, 1), so the table does not depend on `threads`.

    Return:
        one row per run and method with columns run, method, pose_err, map_err
    """
    rng = as_stream(rng)
    settings = {
        "n_points": n_points,
        "n_cams": n_cams,
        "sigma": sigma,
        "focal": focal,
        "n_particles": n_particles,
        "rounds": rounds,
        "mh_steps": mh_steps,
        "message_iters": message_iters,
        "init_spread": init_spread,
        "proposal_spread": proposal_spread,
    }
    tasks = [(run, rng.seed_value, rng.key, settings) for run in range(n_runs)]
    if threads > 1:
        with Pool(threads) as pool:
            results = list(
                tqdm.tqdm(pool.imap(_compare_task, tasks), total=n_runs, disable=not progress, desc="sfm runs")
            )
    else:
        results = [_compare_task(task) for task in tqdm.tqdm(tasks, disable=not progress, desc="sfm runs")]
    rows = [row for result in results for row in result]
    frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    logger.info(
        "Mean errors per method:\n"
        + frame.groupby("method")[["pose_err", "map_err"]].mean().to_string()
    )
    return frame
