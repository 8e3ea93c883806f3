"""Exception types shared across the package."""


class FlowSynthError(Exception):
    """Base class for all package-specific errors."""


class InputError(FlowSynthError):
    """Missing or unusable input: bad paths, empty trees, bad arguments."""


class FormatError(InputError):
    """A file failed to parse as its declared format."""


class DataError(FlowSynthError):
    """A file parsed, but its payload values are unusable (NaN/Inf)."""


class ConsistencyError(FlowSynthError):
    """Inputs disagree with each other: id collisions, misaligned sequences."""
