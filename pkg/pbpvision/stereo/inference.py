"""
Plane inference for slanted-plane stereo.

Initialization runs dense stereo in both directions, drops inconsistent pixels and
fits one RANSAC plane per superpixel. Each round then proposes Gaussian
perturbations of every superpixel's plane, selects one candidate per superpixel
with max-product BP over the superpixel graph, and keeps the lowest-energy
assignment seen so far.
"""

import logging
import typing
from dataclasses import dataclass, field

import numpy as np
import tqdm

from ..errors import ConfigError
from ..imaging.image import Image
from ..imaging.segmentation import Segmentation
from ..inference.bp import map_indices
from ..inference.graph import Domain, FactorGraph, table_pairwise, table_unary
from ..inference.mcmc import RngStream, as_stream
from .dense import DenseStereoParams, dense_stereo, mutual_consistency, right_disparity
from .energy import ExtraUnary, StereoEnergyModel, StereoEnergyParams
from .planes import robust_superpixel_plane

logger = logging.getLogger(__name__)


@dataclass
class PlaneInferenceConfig:
    """
    Attributes:
        d_max (int): largest disparity of the dense initialization
        sigma_a, sigma_b, sigma_c (float): proposal standard deviations of A, B, C
        n_candidates (int): perturbed planes proposed per superpixel and round
        rounds (int): maximum number of proposal rounds
        patience (int): rounds without a lower energy before stopping
        ransac_iters (int): RANSAC hypotheses per superpixel
        inlier_tol (float): RANSAC inlier threshold in pixels
        consistency_tol (float): left/right check tolerance in pixels
        bp_iters (int): max-product rounds per proposal round
        schedule (str): BP schedule over the superpixel graph
        dense (DenseStereoParams): parameters of the dense initialization
    """

    d_max: int = 16
    sigma_a: float = 0.007
    sigma_b: float = 0.007
    sigma_c: float = 0.1
    n_candidates: int = 15
    rounds: int = 6
    patience: int = 1
    ransac_iters: int = 200
    inlier_tol: float = 1.0
    consistency_tol: float = 1.0
    bp_iters: int = 50
    schedule: str = "synchronous"
    dense: DenseStereoParams = field(default_factory=DenseStereoParams)

    @property
    def sigma(self) -> np.ndarray:
        return np.array([self.sigma_a, self.sigma_b, self.sigma_c])


@dataclass
class PlaneInferenceResult:
    """
    Attributes:
        planes (np.ndarray): (S, 3) lowest-energy planes found
        energy (float): total energy of `planes`
        initial_planes (np.ndarray): planes the rounds started from
        energy_history (list of float): retained energy, initial value first then one per round
        occluded (np.ndarray or None): occlusion mask of the dense initialization
    """

    planes: np.ndarray
    energy: float
    initial_planes: np.ndarray
    energy_history: typing.List[float]
    occluded: typing.Optional[np.ndarray] = None


def initialize_planes(
    left: Image,
    right: Image,
    segmentation: Segmentation,
    config: PlaneInferenceConfig = None,
    rng: RngStream = None,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Dense stereo in both directions, mutual consistency, then one RANSAC plane per
    superpixel on its consistent pixels.

    Return:
        (S, 3) planes and the occlusion mask
    """
    config = config or PlaneInferenceConfig()
    rng = as_stream(rng)
    d_left = dense_stereo(left, right, config.d_max, config.dense)
    d_right = right_disparity(left, right, config.d_max, config.dense)
    occluded = mutual_consistency(d_left.values, d_right.values, config.consistency_tol)
    planes = np.zeros((segmentation.n_segments, 3))
    for i in range(segmentation.n_segments):
        ys, xs = segmentation.pixels(i)
        planes[i] = robust_superpixel_plane(
            xs,
            ys,
            d_left.values[ys, xs],
            ~occluded[ys, xs],
            config.ransac_iters,
            config.inlier_tol,
            rng.child(i),
        )
    logger.debug(
        f"Initialized {segmentation.n_segments} planes, {occluded.mean():.1%} pixels occluded"
    )
    return planes, occluded


def candidate_planes(
    planes: np.ndarray, config: PlaneInferenceConfig, rng: RngStream
) -> np.ndarray:
    """
    (S, 1 + n_candidates, 3) candidate sets; index 0 holds the current plane.
    """
    noise = rng.normal(size=(planes.shape[0], config.n_candidates, 3)) * config.sigma
    return np.concatenate([planes[:, None, :], planes[:, None, :] + noise], axis=1)


def select_candidates(
    model: StereoEnergyModel,
    candidates: np.ndarray,
    schedule: str = "synchronous",
    max_iters: int = 50,
) -> np.ndarray:
    """
    Max-product BP over the superpixel graph with the energy restricted to the
    candidate sets.

    Return:
        (S,) index of the chosen candidate of every superpixel
    """
    segmentation = model.segmentation
    graph = FactorGraph()
    for i in range(segmentation.n_segments):
        cost = model.unary_costs(i, candidates[i])
        graph.add_variable(Domain.discrete(candidates.shape[1]), table_unary(-cost))
    for i, j in segmentation.edges:
        cost = model.pair_costs(i, j, candidates[i], candidates[j])
        graph.add_edge(i, j, table_pairwise(-cost))
    return map_indices(graph, schedule=schedule, max_iters=max_iters)


def infer_planes(
    left: Image,
    right: Image,
    segmentation: Segmentation,
    params: StereoEnergyParams = None,
    config: PlaneInferenceConfig = None,
    rng: RngStream = None,
    init: np.ndarray = None,
    extra_unary: ExtraUnary = None,
    model: StereoEnergyModel = None,
    progress: bool = False,
) -> PlaneInferenceResult:
    """
    Slanted-plane inference by repeated candidate proposal and max-product selection.

    Args:
        left, right (Image): rectified pair
        segmentation (Segmentation): superpixels of the left image
        params (StereoEnergyParams): energy parameters
        config (PlaneInferenceConfig): proposal and initialization settings
        rng (RngStream): random stream; child 0 initializes, child r + 1 drives round r
        init (np.ndarray): warm-start planes, skipping the dense initialization
        extra_unary (callable): additional per-superpixel energy
        model (StereoEnergyModel): prebuilt energy model for this pair
        progress (bool): show a progress bar over rounds

    Return:
        PlaneInferenceResult whose energy history is non-increasing
    """
    config = config or PlaneInferenceConfig()
    if config.rounds < 0 or config.n_candidates < 0:
        raise ConfigError("rounds and n_candidates must be non-negative")
    rng = as_stream(rng)
    if model is None:
        model = StereoEnergyModel(left, right, segmentation, params)
    elif params is not None:
        model = model.with_params(params)
    if extra_unary is not None:
        model = model.with_extra_unary(extra_unary)

    occluded = None
    if init is None:
        init, occluded = initialize_planes(left, right, segmentation, config, rng.child(0))
    init = np.array(init, dtype=float)

    best = init.copy()
    best_energy = model.total_energy(best)
    history = [best_energy]
    stale = 0
    for r in tqdm.tqdm(range(config.rounds), disable=not progress, desc="rounds"):
        candidates = candidate_planes(best, config, rng.child(r + 1))
        chosen = select_candidates(model, candidates, config.schedule, config.bp_iters)
        proposal = candidates[np.arange(len(chosen)), chosen]
        proposal_energy = model.total_energy(proposal)
        if proposal_energy < best_energy:
            best, best_energy = proposal, proposal_energy
            stale = 0
        else:
            stale += 1
        history.append(best_energy)
        logger.debug(f"Round {r + 1}: proposal {proposal_energy:.3f}, retained {best_energy:.3f}")
        if stale >= config.patience:
            break
    return PlaneInferenceResult(best, best_energy, init, history, occluded)
