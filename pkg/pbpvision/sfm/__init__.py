from .camera import (
    POINT_DIMENSION,
    POSE_DIMENSION,
    camera_coordinates,
    reproject,
    reprojection_log_potential,
    rotation_matrix,
)
from .scene import RESULT_COLUMNS, SfmScene, reconstruction_errors, save_results, synth_scene
from .pbp_sfm import SfmPosterior, sfm_graph, sfm_pbp
from .baseline import BaselineResult, mode_baseline, reprojection_residuals
from .benchmark import compare_run, run_comparison
