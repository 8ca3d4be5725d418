"""
Contrastive divergence for energy-based models with latent plane assignments.

For data-anchored states Z_i the CD direction is

    Σ_i ( E_{z ~ K(Z_i, ·)} [∇E_i(z)] - ∇E_i(Z_i) )

with K a few MCMC steps started at Z_i. It estimates the gradient of
Σ_i ln P(Z_i | x_i) with respect to the energy parameters, so parameters ascend it.
"""

import typing

import numpy as np

from ..inference.mcmc import RngStream, as_stream
from ..stereo.energy import StereoEnergyModel

State = typing.Any
# energy_gradient(i, state) -> gradient vector of the energy of example i
EnergyGradient = typing.Callable[[int, State], np.ndarray]
# mcmc_step(i, state, rng) -> new state
McmcStep = typing.Callable[[int, State, RngStream], State]

PLANE_SIGMA = np.array([0.007, 0.007, 0.1])


def contrastive_divergence(
    states: typing.Sequence[State],
    energy_gradient: EnergyGradient,
    mcmc_step: McmcStep,
    rng: RngStream = None,
    n_samples: int = 10,
) -> np.ndarray:
    rng = as_stream(rng)
    total = None
    for i, state in enumerate(states):
        stream = rng.child(i)
        data = np.asarray(energy_gradient(i, state), dtype=float)
        samples = [
            np.asarray(energy_gradient(i, mcmc_step(i, state, stream.child(m))), dtype=float)
            for m in range(n_samples)
        ]
        term = np.mean(samples, axis=0) - data
        total = term if total is None else total + term
    return total


def metropolis_plane_sweep(
    model: StereoEnergyModel,
    planes: np.ndarray,
    rng: RngStream,
    sigma: np.ndarray = PLANE_SIGMA,
    temperature: float = 1.0,
    steps: int = 1,
) -> np.ndarray:
    """
    `steps` sweeps of single-superpixel Metropolis moves with Gaussian plane
    perturbations. At zero temperature every move is rejected.
    """
    planes = np.array(planes, dtype=float)
    for _ in range(steps):
        for i in range(planes.shape[0]):
            candidate = planes[i] + rng.normal(size=3) * sigma
            log_u = np.log(rng.uniform())
            if temperature <= 0:
                continue
            current, proposed = model.local_energy(i, planes, np.stack([planes[i], candidate]))
            if log_u < -(proposed - current) / temperature:
                planes[i] = candidate
    return planes


def cd_gradient(
    models: typing.Sequence[StereoEnergyModel],
    latents: typing.Sequence[np.ndarray],
    rng: RngStream = None,
    n_samples: int = 10,
    mcmc_steps: int = 1,
    sigma: np.ndarray = PLANE_SIGMA,
    temperature: float = 1.0,
) -> np.ndarray:
    """
    CD direction over (λ_S, τ_S, λ_A, λ_B) for a stereo corpus, with the model
    expectation estimated from `n_samples` perturbed assignments per pair.
    """

    def gradient(i, planes):
        return models[i].energy_gradient(planes)

    def step(i, planes, stream):
        return metropolis_plane_sweep(models[i], planes, stream, sigma, temperature, mcmc_steps)

    return contrastive_divergence(latents, gradient, step, rng, n_samples)
