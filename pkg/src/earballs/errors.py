"""Exception types shared across the toolkit."""


class EarballsError(Exception):
    """Base class for all toolkit errors."""


class ArityError(EarballsError, ValueError):
    """Wrong number of inputs (too few points, wrong category count, ...)."""


class ShapeError(EarballsError, ValueError):
    """Inputs whose shapes or lengths do not line up."""


class DomainError(EarballsError, ValueError):
    """Argument outside a function's mathematical domain."""


class DegenerateBatchError(EarballsError, ValueError):
    """A batch whose mean pairwise distance is zero (all points identical)."""


class UndefinedCorrelationError(EarballsError, ValueError):
    """Correlation requested on a distance vector with zero variance."""


class FormatError(EarballsError, ValueError):
    """Audio file not in the supported WAV format."""


class ParseError(EarballsError, ValueError):
    """Malformed feature table or response file."""


class SamplingError(EarballsError, ValueError):
    """A draw that cannot be satisfied (batch larger than dataset, ...)."""


class ConfigurationError(EarballsError, ValueError):
    """Invalid or contradictory run configuration."""


class GenerationError(EarballsError, RuntimeError):
    """Listening-test generation could not satisfy its preconditions."""
