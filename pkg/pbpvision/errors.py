"""
Exception hierarchy of the library.

Configuration problems (bad parameters, unsupported schedules, oversize oracles)
derive from ConfigError; problems with the data being processed derive from
DataError. The command line maps the two families to exit codes 2 and 3.
"""


class PbpVisionError(Exception):
    pass


class ConfigError(PbpVisionError, ValueError):
    pass


class DataError(PbpVisionError):
    pass


# Configuration family


class ScheduleError(ConfigError):
    pass


class OracleInfeasibleError(ConfigError):
    pass


# Data family


class DomainMismatchError(DataError):
    pass


class EvaluationError(DataError):
    pass


class DivisionUnsafeError(DataError):
    pass


class InvalidStartError(DataError):
    pass


class DegenerateWeightsError(DataError):
    pass


class UnnormalizableError(DataError):
    pass


class ResampleError(DataError):
    pass


class ParticleWeightError(DataError):
    pass


class MalformedImageError(DataError):
    pass


class DegenerateChannelError(DataError):
    pass


class HeightBinningError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class FitDegenerateError(DataError):
    pass


class EpipoleUnreliableError(DataError):
    pass


class TooFewMatchesError(DataError):
    pass


class BehindCameraError(DataError):
    pass
