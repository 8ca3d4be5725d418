from .graph import (
    Domain,
    FactorGraph,
    assignment_indices,
    brute_force_joint,
    brute_force_map,
    brute_force_marginals,
    energy,
    log_partition,
    table_pairwise,
    table_unary,
)
from .bp import (
    BeliefTable,
    map_indices,
    max_product,
    message_update,
    message_update_division,
    node_log_belief,
    sum_product,
)
from .grid import grid_energy, grid_min_sum
from .mcmc import (
    DiscreteProposal,
    GaussianRandomWalk,
    GeometricCooling,
    IndependentProposal,
    ProposalKernel,
    RngStream,
    TargetDensity,
    gibbs_sweep,
    graph_conditionals,
    metropolis_hastings,
    metropolis_hastings_batch,
    particle_filter_step,
    simulated_annealing,
)
from .pbp import (
    ParticleSet,
    PbpResult,
    pbp_belief,
    pbp_message_update,
    pbp_resample,
    pbp_run,
)
from .oracle import BENCH_COLUMNS, oracle_bench, oracle_check
