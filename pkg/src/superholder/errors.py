"""Exception hierarchy shared by all toolkit modules."""


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class InputError(ToolkitError, ValueError):
    """An argument is outside the domain of the operation."""


class ConfigurationError(ToolkitError):
    """Model parameters violate a regime required by the experiment."""


class UnsupportedError(ToolkitError):
    """The operation is not defined for the given parameters."""


class ResolutionError(ToolkitError):
    """A requested threshold is below the resolution of the particle scheme."""


class RefinementError(ToolkitError):
    """A numerical scheme failed its step-halving consistency check."""


class CoverageError(ToolkitError):
    """A computational grid does not cover the support it has to."""


class EmptySupportError(ToolkitError):
    """No particle falls inside the requested window."""


class ResourceError(ToolkitError):
    """A simulation exceeded its memory/population budget."""


class InsufficientSampleError(ToolkitError):
    """Too few usable replicates survived filtering."""


class ConfigParseError(ToolkitError, ValueError):
    """Malformed configuration file or flag set."""
