from .corpus import StereoPair, load_corpus, load_pair, save_metrics
from .view import ViewPrediction, distortion, forward_warp, view_predict, view_prediction_error
from .model import (
    MdeEnergy,
    MdeParams,
    bootstrap_em,
    fit_mono_weights,
    infer_disparity,
    mde_energy,
    mono_prediction,
    monocular_infer,
)
from .baseline import (
    GroundPlaneBaseline,
    fit_depth_scale,
    ground_plane_baseline,
    rms_disparity,
    rms_vs_groundtruth,
)
