from .kinematics import (
    depth_change,
    forward_project,
    next_disparity,
    valid_motion,
    velocity_from_depth_change,
    velocity_from_ratio,
)
from .matching import MATCH_COLUMNS, harris_corners, harris_response, sparse_matches
from .epipole import estimate_epipole, fundamental_matrix, normalize_points
from .velocity import (
    MotionEnergyModel,
    MotionParams,
    VelocityField,
    sample_bilinear,
    solve_velocity,
    sparse_velocity_prior,
)
from .pipeline import (
    AlternationResult,
    FrameQuad,
    alternate,
    fourth_view_error,
    initial_velocities,
    predict_fourth_view,
    save_errors,
    train_motion,
    warp_rms,
)
