"""
Structure from motion as a bipartite graphical model solved by particle belief
propagation: camera nodes carry 6-D poses, map nodes 3-D points, and every
observation x_ij links camera i to point j with

    Ψ_ij(P_i, Y_j) = exp(-‖Q(P_i, Y_j) - x_ij‖² / 2σ²).

There are no unary potentials; the particles are initialized around a starting
estimate and moved by MCMC from the current beliefs.
"""

import logging
import typing
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..inference.graph import Domain, FactorGraph
from ..inference.mcmc import GaussianRandomWalk, RngStream, as_stream
from ..inference.pbp import PbpResult, pbp_run
from .camera import POINT_DIMENSION, POSE_DIMENSION, reprojection_log_potential

logger = logging.getLogger(__name__)


@dataclass
class SfmPosterior:
    """
    Attributes:
        poses (np.ndarray): (C, 6) posterior mean pose of every camera
        points (np.ndarray): (P, 3) posterior mean of every map point
        pose_spread (np.ndarray): (C,) mean particle standard deviation per camera
        point_spread (np.ndarray): (P,) mean particle standard deviation per point
        result (PbpResult): particle sets and messages
    """

    poses: np.ndarray
    points: np.ndarray
    pose_spread: np.ndarray
    point_spread: np.ndarray
    result: PbpResult


def sfm_graph(observations: np.ndarray, sigma: float, focal: float) -> FactorGraph:
    """Cameras are nodes 0..C-1, map points follow"""
    observations = np.asarray(observations, dtype=float)
    n_cams, n_points, _ = observations.shape
    graph = FactorGraph()
    for _ in range(n_cams):
        graph.add_variable(Domain.particle(POSE_DIMENSION))
    for _ in range(n_points):
        graph.add_variable(Domain.particle(POINT_DIMENSION))
    for i in range(n_cams):
        for j in range(n_points):
            graph.add_edge(i, n_cams + j, reprojection_log_potential(observations[i, j], sigma, focal))
    return graph


def proposal_scales(init_points: np.ndarray, sigma: float, focal: float) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Per-dimension spreads matching one σ of image noise: σ z̄ / f for positions and
    σ / f for angles.
    """
    depth = float(np.mean(np.abs(np.asarray(init_points)[:, 2])))
    position = sigma * depth / focal
    pose = np.array([position] * 3 + [sigma / focal] * 3)
    point = np.full(POINT_DIMENSION, position)
    return pose, point


def gaussian_sampler(mean: np.ndarray, scale: np.ndarray):
    mean = np.asarray(mean, dtype=float)
    scale = np.asarray(scale, dtype=float)
    log_norm = -np.sum(np.log(np.sqrt(2 * np.pi) * scale))

    def sampler(n, rng):
        z = rng.normal(size=(n, len(mean)))
        return mean + z * scale, -0.5 * np.sum(z**2, axis=1) + log_norm

    return sampler


def sfm_pbp(
    observations: np.ndarray,
    init_poses: np.ndarray,
    init_points: np.ndarray,
    sigma: float = 1.0,
    focal: float = 500.0,
    n_particles: int = 25,
    rounds: int = 5,
    rng: RngStream = None,
    mh_steps: int = 5,
    message_iters: int = 2,
    init_spread: float = 1.0,
    proposal_spread: float = 1.0,
) -> SfmPosterior:
    """
    Posterior means of the poses and points by sum-product PBP.

    Args:
        observations (np.ndarray): (C, P, 2) image coordinates
        init_poses, init_points (np.ndarray): centers of the initial particle clouds
        sigma (float): observation noise
        focal (float): focal length
        n_particles (int): particles per node
        rounds (int): PBP resampling rounds
        rng (RngStream): random stream
        mh_steps (int): MH steps per particle and round
        message_iters (int): message passes per round, 2 spans the bipartite graph
        init_spread, proposal_spread (float): multipliers of the σ-matched spreads
    """
    if sigma <= 0:
        raise ConfigError("PBP needs a positive observation noise")
    rng = as_stream(rng)
    init_poses = np.asarray(init_poses, dtype=float)
    init_points = np.asarray(init_points, dtype=float)
    n_cams, n_points = len(init_poses), len(init_points)
    graph = sfm_graph(observations, sigma, focal)
    pose_scale, point_scale = proposal_scales(init_points, sigma, focal)

    samplers, proposals = {}, {}
    for i in range(n_cams):
        samplers[i] = gaussian_sampler(init_poses[i], init_spread * pose_scale)
        proposals[i] = GaussianRandomWalk(proposal_spread * pose_scale)
    for j in range(n_points):
        samplers[n_cams + j] = gaussian_sampler(init_points[j], init_spread * point_scale)
        proposals[n_cams + j] = GaussianRandomWalk(proposal_spread * point_scale)

    result = pbp_run(
        graph,
        n_particles,
        rounds,
        "sum",
        rng,
        samplers=samplers,
        message_iters=message_iters,
        mh_steps=mh_steps,
        proposals=proposals,
    )
    particles = [particle_set.particles for particle_set in result.particle_sets]
    means = [p.mean(axis=0) for p in particles]
    spreads = np.array([p.std(axis=0).mean() for p in particles])
    logger.debug(f"SfM PBP: {n_particles} particles, {rounds} rounds")
    return SfmPosterior(
        np.array(means[:n_cams]),
        np.array(means[n_cams:]),
        spreads[:n_cams],
        spreads[n_cams:],
        result,
    )
