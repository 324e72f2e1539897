"""Exception types raised by the engine.

Every error carries a short machine-readable ``reason`` and a distinct
process exit code so the CLI can report failures uniformly.
"""


class EngineError(Exception):
    reason = "engine-error"
    exit_code = 1


class InvalidIntervalError(EngineError):
    reason = "invalid-interval"
    exit_code = 3


class BoundsError(EngineError):
    reason = "out-of-bounds"
    exit_code = 4


class CoverageError(EngineError):
    reason = "coverage"
    exit_code = 5


class OutOfRangeError(EngineError):
    reason = "out-of-range"
    exit_code = 6


class DimensionMismatchError(EngineError):
    reason = "dimension-mismatch"
    exit_code = 7


class ConsistencyError(EngineError):
    """A decomposition produced a non-positive integral. Never expected."""

    reason = "internal-consistency"
    exit_code = 8


class CalibrationImpossibleError(EngineError):
    reason = "calibration-impossible"
    exit_code = 9


class EmptyWindowError(EngineError):
    reason = "empty-window"
    exit_code = 10


class InvalidInputError(EngineError):
    reason = "invalid-input"
    exit_code = 11


class FrameTooSmallError(EngineError):
    reason = "frame-too-small"
    exit_code = 12


class FormatError(EngineError):
    reason = "format"
    exit_code = 13


class ConfigError(EngineError):
    reason = "config"
    exit_code = 14
