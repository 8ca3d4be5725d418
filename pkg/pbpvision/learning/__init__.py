from .params import (
    BLOCK_SCALE,
    initial_params,
    load_params,
    params_from_blocks,
    params_to_blocks,
    save_params,
)
from .cd import contrastive_divergence, cd_gradient, metropolis_plane_sweep
from .hard_em import (
    LOG_COLUMNS,
    OPTIONS_MODES,
    TrainConfig,
    TrainState,
    closed_form_match_weights,
    fit_texture_predictors,
    hard_e_step,
    hard_e_steps,
    heldout_distortion,
    m_step,
    match_weight_loss,
    planes_distortion,
    ridge_lstsq,
    supervised_latents,
    train,
)
