"""
Particle belief propagation.

Every node carries one particle set drawn from a sampling distribution W_s. The
message from t to s is estimated at the particles of s by an importance-weighted
average over the particles of t,

    m̂_{t→s}(x) = (1/n) Σ_j Ψ_{t,s}(x_t^j, x) Ψ_t(x_t^j) Π_{u∈Γ_t\\s} m̂_{u→t}(x_t^j) / W_t(x_t^j),

computed in log space. The same sum can be evaluated at any point x, which is what
makes beliefs available away from the particles and lets MCMC draw new particles
from the current belief. Messages are kept unnormalized so stored values and
off-particle evaluations share one scale.
"""

import logging
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import ConfigError, InvalidStartError, ParticleWeightError, ResampleError
from .graph import Assignment, FactorGraph, energy
from .mcmc import (
    DiscreteProposal,
    GaussianRandomWalk,
    ProposalKernel,
    RngStream,
    TargetDensity,
    as_stream,
    metropolis_hastings_batch,
)

logger = logging.getLogger(__name__)

PBP_MODES = ["sum", "max"]

ParticleMessages = typing.Dict[typing.Tuple[int, int], np.ndarray]
Sampler = typing.Callable[[int, RngStream], typing.Tuple[np.ndarray, np.ndarray]]


@dataclass
class ParticleSet:
    """
    Particles of one node and the log of their sampling weights W_s(x_s^i).
    """

    node: int
    particles: np.ndarray
    log_weights: np.ndarray

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float)
        if self.particles.ndim == 1:
            self.particles = self.particles[:, None]
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if len(self.particles) == 0:
            raise ParticleWeightError(f"Node {self.node} has no particles")
        if self.log_weights.shape != (len(self.particles),):
            raise ParticleWeightError("One sampling weight per particle is required")
        if not np.all(np.isfinite(self.log_weights)):
            raise ParticleWeightError(f"Node {self.node} has a zero sampling weight")

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def __len__(self):
        return len(self.particles)


@dataclass
class PbpResult:
    """
    Outcome of pbp_run.

    Attributes:
        particle_sets (list of ParticleSet): final particles per node
        messages (ParticleMessages): messages on the final particles
        log_beliefs (list of np.ndarray): normalized log-beliefs at the final particles
        assignment (Assignment): best-energy assignment seen (max mode only)
        energy_history (list of float): retained best energy after each round (max mode)
    """

    particle_sets: typing.List[ParticleSet]
    messages: ParticleMessages
    log_beliefs: typing.List[np.ndarray]
    assignment: Assignment = None
    energy_history: typing.List[float] = field(default_factory=list)


def zero_messages(graph: FactorGraph, particle_sets: typing.Sequence[ParticleSet]) -> ParticleMessages:
    messages = {}
    for s, t in graph.edges:
        messages[(s, t)] = np.zeros(len(particle_sets[t]))
        messages[(t, s)] = np.zeros(len(particle_sets[s]))
    return messages


def _source_terms(graph, particle_sets, messages, t, s, mode) -> np.ndarray:
    source = particle_sets[t]
    terms = np.broadcast_to(graph.unary_log(t, source.particles), (len(source),)).astype(float)
    for u in graph.neighbors(t):
        if u != s:
            terms = terms + messages[(u, t)]
    if mode == "sum":
        terms = terms - source.log_weights
    return terms


def evaluate_message(
    graph: FactorGraph,
    particle_sets: typing.Sequence[ParticleSet],
    messages: ParticleMessages,
    t: int,
    s: int,
    x: np.ndarray,
    mode: str = "sum",
) -> np.ndarray:
    """
    Importance-sum estimate of the message t→s at arbitrary points x of shape (m, dim).
    In max mode the average over source particles becomes a maximum and sampling
    weights do not enter.
    """
    x = np.asarray(x, dtype=float)
    terms = _source_terms(graph, particle_sets, messages, t, s, mode)
    source = particle_sets[t].particles
    pair = graph.pairwise_log(t, s, source[:, None, :], x[None, :, :])
    scores = terms[:, None] + np.broadcast_to(pair, (len(source), len(x)))
    with np.errstate(divide="ignore", invalid="ignore"):
        if mode == "max":
            return np.max(scores, axis=0)
        return logsumexp(scores, axis=0) - np.log(len(source))


def pbp_message_update(
    graph: FactorGraph,
    particle_sets: typing.Sequence[ParticleSet],
    messages: ParticleMessages,
    edge: typing.Tuple[int, int],
    mode: str = "sum",
) -> np.ndarray:
    """
    Message t→s at the particles of s.

    Args:
        graph (FactorGraph): the model
        particle_sets (list of ParticleSet): one set per node
        messages (ParticleMessages): current messages
        edge (tuple): (t, s)
        mode (str): "sum" or "max"

    Return:
        log-message vector over the particles of s
    """
    t, s = edge
    if mode not in PBP_MODES:
        raise ConfigError(f"Unknown PBP mode {mode}")
    return evaluate_message(graph, particle_sets, messages, t, s, particle_sets[s].particles, mode)


def pbp_belief(
    graph: FactorGraph,
    particle_sets: typing.Sequence[ParticleSet],
    messages: ParticleMessages,
    s: int,
    x,
    mode: str = "sum",
) -> np.ndarray:
    """
    Unnormalized log-belief log Ψ_s(x) + Σ_t log m̂_{t→s}(x) at any query point(s).

    Args:
        x: a single value of shape (dim,) or a batch of shape (m, dim)

    Return:
        log-belief, scalar for a single value or shape (m,)
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = x[None, :] if single else x
    total = np.broadcast_to(graph.unary_log(s, points), (len(points),)).astype(float)
    for t in graph.neighbors(s):
        total = total + evaluate_message(graph, particle_sets, messages, t, s, points, mode)
    return total[0] if single else total


def particle_log_beliefs(graph, particle_sets, messages, s, mode="sum") -> np.ndarray:
    """Unnormalized log-beliefs at the particles of s from the stored messages"""
    total = np.broadcast_to(
        graph.unary_log(s, particle_sets[s].particles), (len(particle_sets[s]),)
    ).astype(float)
    for t in graph.neighbors(s):
        total = total + messages[(t, s)]
    return total


def pass_messages(
    graph: FactorGraph,
    particle_sets: typing.Sequence[ParticleSet],
    iterations: int,
    mode: str = "sum",
    messages: ParticleMessages = None,
) -> ParticleMessages:
    """Synchronous rounds of message updates on fixed particle sets"""
    messages = zero_messages(graph, particle_sets) if messages is None else messages
    keys = sorted(messages)
    for _ in range(iterations):
        messages = {
            key: pbp_message_update(graph, particle_sets, messages, key, mode)
            for key in keys
        }
    return messages


def default_proposal(graph: FactorGraph, s: int, scale: float = 0.1) -> ProposalKernel:
    domain = graph.domains[s]
    if domain.is_finite:
        return DiscreteProposal(domain.labels)
    return GaussianRandomWalk(scale)


def pbp_resample(
    graph: FactorGraph,
    particle_sets: typing.Sequence[ParticleSet],
    messages: ParticleMessages,
    node: int,
    mh_steps: int,
    rng,
    proposal: ProposalKernel = None,
    mode: str = "sum",
) -> ParticleSet:
    """
    Moves every particle of `node` by a short MH chain targeting the current
    belief; the new sampling weights are the belief values at the accepted points.
    """
    if mh_steps < 1:
        raise ConfigError(f"Need at least one MH step, got {mh_steps}")
    rng = as_stream(rng)
    proposal = proposal if proposal is not None else default_proposal(graph, node)
    current = particle_sets[node]

    def log_belief(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        values = pbp_belief(graph, particle_sets, messages, node, flat, mode)
        return values.reshape(x.shape[:-1])

    target = TargetDensity(log_belief, current.particles.shape[1])
    start_values = log_belief(current.particles)
    finite = np.isfinite(start_values)
    if not np.any(finite):
        raise ResampleError(f"Belief of node {node} vanishes at every particle")
    starts = current.particles.copy()
    starts[~finite] = current.particles[int(np.argmax(np.where(finite, start_values, -np.inf)))]
    try:
        particles, values, _ = metropolis_hastings_batch(target, proposal, starts, mh_steps, rng)
    except InvalidStartError as error:
        raise ResampleError(str(error)) from error
    return ParticleSet(node, particles, values)


def uniform_sampler(labels: np.ndarray) -> Sampler:
    """Draws particles uniformly from a label table; log W = -log K"""
    labels = np.asarray(labels, dtype=float)

    def sampler(n, rng):
        index = rng.integers(0, len(labels), size=n)
        return labels[index], np.full(n, -np.log(len(labels)))

    return sampler


def initial_particles(
    graph: FactorGraph,
    n_particles: int,
    rng: RngStream,
    samplers: typing.Mapping[int, Sampler] = None,
) -> typing.List[ParticleSet]:
    samplers = samplers or {}
    sets = []
    for s, domain in enumerate(graph.domains):
        if s in samplers:
            sampler = samplers[s]
        elif domain.is_finite:
            sampler = uniform_sampler(domain.labels)
        else:
            raise ConfigError(f"Node {s} has a particle domain and no initial sampler")
        particles, log_weights = sampler(n_particles, rng.child(s))
        sets.append(ParticleSet(s, particles, log_weights))
    return sets


def _max_assignment(graph, particle_sets, messages) -> Assignment:
    assignment = {}
    for s in range(graph.num_variables):
        beliefs = particle_log_beliefs(graph, particle_sets, messages, s, "max")
        assignment[s] = particle_sets[s].particles[int(np.argmax(beliefs))].copy()
    return assignment


def pbp_run(
    graph: FactorGraph,
    n_particles: int,
    rounds: int,
    mode: str = "sum",
    rng=None,
    samplers: typing.Mapping[int, Sampler] = None,
    particle_sets: typing.Sequence[ParticleSet] = None,
    message_iters: int = None,
    mh_steps: int = 5,
    proposals: typing.Mapping[int, ProposalKernel] = None,
) -> PbpResult:
    """
    Alternates message passing on the current particles and MCMC resampling
    from the beliefs for `rounds` rounds.

    Args:
        graph (FactorGraph): the model
        n_particles (int): particles per node when drawing initial sets
        rounds (int): resampling rounds; 0 keeps the initial particles
        mode (str): "sum" for marginals, "max" for a MAP estimate
        rng (RngStream): random stream, split per round and node
        samplers (mapping): initial sampler per node, uniform over labels by default
        particle_sets (list of ParticleSet): explicit initial particles, overrides samplers
        message_iters (int): synchronous message rounds per resampling round,
            the number of variables by default
        mh_steps (int): MH steps per particle and round
        proposals (mapping): MH proposal kernel per node

    Return:
        PbpResult
    """
    if mode not in PBP_MODES:
        raise ConfigError(f"Unknown PBP mode {mode}")
    if rounds < 0:
        raise ConfigError(f"rounds must be >= 0, got {rounds}")
    rng = as_stream(rng)
    proposals = proposals or {}
    message_iters = message_iters if message_iters is not None else max(graph.num_variables, 1)
    if particle_sets is None:
        particle_sets = initial_particles(graph, n_particles, rng.child(0), samplers)
    sets = list(particle_sets)
    messages = pass_messages(graph, sets, message_iters, mode)

    best, best_energy, history = None, np.inf, []

    def retain():
        nonlocal best, best_energy
        candidate = _max_assignment(graph, sets, messages)
        candidate_energy = energy(graph, candidate)
        if best is None or candidate_energy < best_energy:
            best, best_energy = candidate, candidate_energy
        history.append(best_energy)

    if mode == "max":
        retain()
    for r in range(rounds):
        sets = [
            pbp_resample(
                graph, sets, messages, s, mh_steps, rng.child(r + 1, s), proposals.get(s), mode
            )
            for s in range(graph.num_variables)
        ]
        messages = pass_messages(graph, sets, message_iters, mode)
        if mode == "max":
            retain()
        logger.debug(f"PBP round {r + 1}/{rounds} done")

    log_beliefs = []
    for s in range(graph.num_variables):
        values = particle_log_beliefs(graph, sets, messages, s, mode)
        with np.errstate(divide="ignore"):
            log_beliefs.append(values - logsumexp(values))
    return PbpResult(sets, messages, log_beliefs, best, history)
