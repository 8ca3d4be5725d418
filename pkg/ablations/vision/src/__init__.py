from .hog_tilt import HogTiltStudy
from .learning_effect import LearningEffectStudy
from .mde_bootstrap import MdeBootstrapStudy
from .motion_trend import MotionTrendStudy
from .pbp_convergence import PbpConvergenceStudy
from .sfm_comparison import SfmComparisonStudy
