"""
Particle belief propagation and unsupervised CRF pipelines for stereo, monocular
depth, stereo video and structure from motion.
"""

from .errors import ConfigError, DataError, PbpVisionError

__version__ = "0.1.0"
