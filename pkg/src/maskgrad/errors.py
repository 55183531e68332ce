"""Exception types shared across the package."""


class MaskgradError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(MaskgradError):
    """Array dimensions do not match what an operation requires."""


class IngestionError(MaskgradError):
    """A dataset file could not be parsed; the message names row/column."""


class StratificationError(MaskgradError):
    """A class is too small to be split across partitions."""


class SmoteError(MaskgradError):
    """A class is too small for the requested neighbor count."""


class ConfigError(MaskgradError):
    """Invalid or unknown configuration; maps to CLI exit code 2."""


class PrerequisiteError(MaskgradError):
    """A pipeline stage artifact is missing; maps to CLI exit code 3."""
