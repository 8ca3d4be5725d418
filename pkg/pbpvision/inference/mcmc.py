import logging
import typing
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import (
    ConfigError,
    DegenerateWeightsError,
    DomainMismatchError,
    InvalidStartError,
    ScheduleError,
    UnnormalizableError,
)
from .graph import FactorGraph

logger = logging.getLogger(__name__)


class RngStream:
    """
    Reproducible random stream. Two streams built from the same seed and stream key
    produce the same draws; `child` derives independent sub-streams, so per-node or
    per-pair work can be scheduled in any order without changing results.

    Attributes:
        seed_value (int): 64-bit seed
        key (tuple of int): stream identifier
        generator (np.random.Generator): the underlying numpy generator
    """

    def __init__(self, seed: int = 42, stream=0):
        self.seed(seed, stream)

    def seed(self, seed: int, stream=0):
        """
        Resets the stream.

        Args:
            seed (integer): new seed
            stream (integer or tuple of integers): stream id
        """
        self.seed_value = int(seed) % 2**64
        self.key = tuple(int(k) for k in stream) if isinstance(stream, tuple) else (int(stream),)
        sequence = np.random.SeedSequence(self.seed_value, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed_value, self.key + tuple(int(k) for k in keys))

    def __getattr__(self, name):
        if name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream()
    return RngStream(int(rng))


@dataclass
class TargetDensity:
    """
    Unnormalized log-density f(x); evaluates batches of shape (..., dimension).
    """

    log_density: typing.Callable[[np.ndarray], np.ndarray]
    dimension: int = 1

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.log_density(np.asarray(x, dtype=float)), dtype=float)


class ProposalKernel(ABC):
    """
    Proposal q(x'|x) for Metropolis-Hastings. Kernels act on arrays of shape
    (..., dimension) so the same object drives a single chain or a batch.
    """

    symmetric: bool = False

    @abstractmethod
    def sample(self, x: np.ndarray, rng: RngStream) -> np.ndarray:
        pass

    def log_density(self, x_to: np.ndarray, x_from: np.ndarray) -> np.ndarray:
        """log q(x_to | x_from)"""
        raise NotImplementedError(f"{type(self).__name__} has no proposal density")


class GaussianRandomWalk(ProposalKernel):
    symmetric = True

    def __init__(self, scale=1.0):
        self.scale = np.asarray(scale, dtype=float)

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x + self.scale * rng.normal(size=x.shape)

    def log_density(self, x_to, x_from):
        z = (np.asarray(x_to) - np.asarray(x_from)) / self.scale
        scale = np.broadcast_to(self.scale, z.shape[-1:])
        return -0.5 * np.sum(z**2, axis=-1) - np.sum(np.log(np.sqrt(2 * np.pi) * scale))


def label_indices(labels: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Index of every row of `values` within the label table"""
    flat = np.asarray(values, dtype=float).reshape(-1, labels.shape[1])
    matches = np.all(flat[:, None, :] == labels[None, :, :], axis=2)
    if not np.all(matches.any(axis=1)):
        raise DomainMismatchError("Value outside the label set")
    return np.argmax(matches, axis=1)


class DiscreteProposal(ProposalKernel):
    """
    Moves to one of the other labels uniformly at random.
    """

    symmetric = True

    def __init__(self, labels):
        labels = np.asarray(labels, dtype=float)
        self.labels = labels[:, None] if labels.ndim == 1 else labels

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        n_labels = self.labels.shape[0]
        if n_labels == 1:
            return x.copy()
        index = label_indices(self.labels, x)
        step = rng.integers(1, n_labels, size=len(index))
        return self.labels[(index + step) % n_labels].reshape(x.shape)

    def log_density(self, x_to, x_from):
        same = np.all(np.asarray(x_to) == np.asarray(x_from), axis=-1)
        return np.where(same, -np.inf, -np.log(max(self.labels.shape[0] - 1, 1)))


class IndependentProposal(ProposalKernel):
    """
    Proposal that ignores the current state.

    Attributes:
        sampler (callable): sampler(rng, batch_shape) -> array (*batch_shape, dimension)
        density (callable): log-density of a proposed point
    """

    def __init__(self, sampler, density):
        self.sampler = sampler
        self.density = density

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.sampler(rng, x.shape[:-1]), dtype=float).reshape(x.shape)

    def log_density(self, x_to, x_from):
        return np.asarray(self.density(np.asarray(x_to, dtype=float)), dtype=float)


@dataclass
class GeometricCooling:
    """Temperature schedule T(t) = t0·gamma^t"""

    t0: float = 1.0
    gamma: float = 0.95

    def __call__(self, step: int) -> float:
        return self.t0 * self.gamma**step


def mh_transition(
    target: TargetDensity,
    proposal: ProposalKernel,
    x: np.ndarray,
    fx: np.ndarray,
    rng: RngStream,
    temperature: float = 1.0,
):
    """
    One Metropolis-Hastings transition for a single state of shape (dimension,)
    or a batch of shape (n, dimension). The uniform is always drawn so chains at
    different temperatures consume the stream identically.

    Return:
        next states, their log-densities, acceptance probabilities, accepted flags
    """
    candidate = proposal.sample(x, rng)
    f_candidate = target(candidate)
    log_ratio = (f_candidate - fx) / temperature
    if not proposal.symmetric:
        log_ratio = (
            log_ratio
            + proposal.log_density(x, candidate)
            - proposal.log_density(candidate, x)
        )
    u = rng.random() if np.ndim(fx) == 0 else rng.random(np.shape(fx))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_alpha = np.minimum(np.nan_to_num(log_ratio, nan=-np.inf), 0.0)
        accepted = np.log(u) < log_alpha
    alpha = np.exp(log_alpha)
    x_next = np.where(np.asarray(accepted)[..., None], candidate, x)
    f_next = np.where(accepted, f_candidate, fx)
    return x_next, f_next, alpha, accepted


def _start(target: TargetDensity, init) -> typing.Tuple[np.ndarray, np.ndarray]:
    x = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    fx = target(x)
    if not np.all(np.isfinite(fx)):
        raise InvalidStartError("Initial state has zero target density")
    return x, fx


def metropolis_hastings(
    target: TargetDensity,
    proposal: ProposalKernel,
    init,
    steps: int,
    rng,
    callback: typing.Callable[[int, float, bool], None] = None,
) -> typing.Tuple[np.ndarray, float]:
    """
    Metropolis-Hastings chain with acceptance
    α = min(f(x*) q(x|x*) / (f(x) q(x*|x)), 1); rejected proposals keep the
    current value. Symmetric kernels skip the proposal density entirely.

    Args:
        target (TargetDensity): unnormalized log-density
        proposal (ProposalKernel): candidate generator
        init: initial state
        steps (int): chain length
        rng (RngStream): random stream
        callback (callable): called with (step, alpha, accepted) after each step

    Return:
        (steps, dimension) samples and the acceptance rate
    """
    if steps < 1:
        raise ConfigError(f"Need at least one MH step, got {steps}")
    rng = as_stream(rng)
    x, fx = _start(target, init)
    samples = np.empty((steps, x.size))
    accepted_count = 0
    for step in range(steps):
        x, fx, alpha, accepted = mh_transition(target, proposal, x, fx, rng)
        samples[step] = x
        accepted_count += int(accepted)
        if callback is not None:
            callback(step, float(alpha), bool(accepted))
    return samples, accepted_count / steps


def metropolis_hastings_batch(
    target: TargetDensity,
    proposal: ProposalKernel,
    inits: np.ndarray,
    steps: int,
    rng,
) -> typing.Tuple[np.ndarray, np.ndarray, float]:
    """
    Runs one independent chain per row of `inits` in lockstep.

    Return:
        final states (n, dimension), their log-densities and the acceptance rate
    """
    if steps < 1:
        raise ConfigError(f"Need at least one MH step, got {steps}")
    rng = as_stream(rng)
    x = np.array(inits, dtype=float)
    fx = target(x)
    if not np.all(np.isfinite(fx)):
        raise InvalidStartError("A chain starts at zero target density")
    accepted_count = 0
    for _ in range(steps):
        x, fx, _, accepted = mh_transition(target, proposal, x, fx, rng)
        accepted_count += int(np.sum(accepted))
    return x, fx, accepted_count / (steps * len(x))


def simulated_annealing(
    target: TargetDensity,
    proposal: ProposalKernel,
    init,
    steps: int,
    rng,
    schedule: typing.Callable[[int], float] = None,
    callback: typing.Callable[[int, float, bool], None] = None,
) -> np.ndarray:
    """
    Metropolis-Hastings with the density ratio raised to 1/T(t). With T ≡ 1 the
    transition rule and the stream usage equal metropolis_hastings.

    Return:
        the state with the highest target density seen along the chain
    """
    if steps < 1:
        raise ConfigError(f"Need at least one annealing step, got {steps}")
    schedule = schedule if schedule is not None else GeometricCooling()
    rng = as_stream(rng)
    x, fx = _start(target, init)
    best, best_f = x.copy(), float(fx)
    previous = np.inf
    for step in range(steps):
        temperature = float(schedule(step))
        if not temperature > 0:
            raise ScheduleError(f"Temperature must be positive, got {temperature} at step {step}")
        if temperature > previous:
            raise ScheduleError("Cooling schedule must be non-increasing")
        previous = temperature
        x, fx, alpha, accepted = mh_transition(target, proposal, x, fx, rng, temperature)
        if float(fx) > best_f:
            best, best_f = np.array(x, copy=True), float(fx)
        if callback is not None:
            callback(step, float(alpha), bool(accepted))
    return best


Conditional = typing.Callable[[np.ndarray], typing.Tuple[np.ndarray, np.ndarray]]


def gibbs_sweep(conditionals: typing.Sequence[Conditional], state, rng) -> np.ndarray:
    """
    Resamples every coordinate from its exact conditional, in index order.

    Args:
        conditionals (list of callables): conditionals[i](state) returns the support
            values of coordinate i and their unnormalized log-weights
        state (array): current state, one entry per coordinate
        rng (RngStream): random stream

    Return:
        the new state
    """
    rng = as_stream(rng)
    state = np.array(state, copy=True)
    for i, conditional in enumerate(conditionals):
        values, log_weights = conditional(state)
        log_weights = np.asarray(log_weights, dtype=float)
        with np.errstate(divide="ignore"):
            log_z = logsumexp(log_weights)
        if not np.isfinite(log_z):
            raise UnnormalizableError(f"Conditional of coordinate {i} cannot be normalized")
        p = np.exp(log_weights - log_z)
        state[i] = np.asarray(values)[rng.choice(len(p), p=p / p.sum())]
    return state


def graph_conditionals(graph: FactorGraph) -> typing.List[Conditional]:
    """
    Exact single-site conditionals of a finite FactorGraph over label indices.
    """

    def make(i):
        size = graph.domains[i].size

        def conditional(state):
            log_weights = graph.unary_table(i).copy()
            for j in graph.neighbors(i):
                log_weights = log_weights + graph.pairwise_table(i, j)[:, int(state[j])]
            return np.arange(size), log_weights

        return conditional

    return [make(i) for i in range(graph.num_variables)]


def particle_filter_step(
    particles: np.ndarray,
    weights: np.ndarray,
    transition: typing.Callable[[np.ndarray, RngStream], np.ndarray],
    log_likelihood: typing.Callable[[np.ndarray], np.ndarray],
    rng,
    proposal_update: typing.Callable[[np.ndarray, np.ndarray], None] = None,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    One particle filter iteration: draw from the proposal, reweight by the
    likelihood, resample proportionally to the weights and reset the weights
    to 1/P. `proposal_update` is called on the resampled set.
    """
    rng = as_stream(rng)
    particles = np.asarray(particles, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
        raise DegenerateWeightsError("Particle weights must be non-negative and sum to 1")
    proposed = np.asarray(transition(particles, rng), dtype=float)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights) + np.asarray(log_likelihood(proposed), dtype=float)
        log_z = logsumexp(log_w)
    if not np.isfinite(log_z):
        raise DegenerateWeightsError("Likelihood is zero for every particle")
    p = np.exp(log_w - log_z)
    n = len(particles)
    index = rng.choice(n, size=n, p=p / p.sum())
    resampled = proposed[index]
    uniform = np.full(n, 1.0 / n)
    if proposal_update is not None:
        proposal_update(resampled, uniform)
    return resampled, uniform
