from .planes import (
    disparity_from_planes,
    fit_plane_lstsq,
    load_planes,
    plane_disparity,
    ransac_plane_fit,
    save_planes,
)
from .dense import (
    DenseStereoParams,
    DisparityMap,
    dense_stereo,
    matching_cost_volume,
    mutual_consistency,
    right_disparity,
)
from .energy import (
    BETA_Y_NAMES,
    EnergyBreakdown,
    StereoEnergyModel,
    StereoEnergyParams,
    match_energy,
    smoothness_energy,
    texture_energy,
    total_energy,
)
from .inference import (
    PlaneInferenceConfig,
    PlaneInferenceResult,
    candidate_planes,
    infer_planes,
    initialize_planes,
    select_candidates,
)
