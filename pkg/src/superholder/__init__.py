"""Simulation and estimation toolkit for the Hoelder regularity of stable
superprocess densities in one dimension."""

__version__ = "0.1.0"

from .cloud import ParticleCloud
from .errors import (
    ConfigParseError,
    ConfigurationError,
    CoverageError,
    EmptySupportError,
    InputError,
    InsufficientSampleError,
    RefinementError,
    ResolutionError,
    ResourceError,
    ToolkitError,
    UnsupportedError,
)
from .params import CONTINUITY, DENSITY, OPTIMALITY, ModelParams

__all__ = [
    "__version__",
    "ParticleCloud",
    "ModelParams",
    "DENSITY",
    "CONTINUITY",
    "OPTIMALITY",
    "ToolkitError",
    "InputError",
    "ConfigParseError",
    "ConfigurationError",
    "CoverageError",
    "EmptySupportError",
    "InsufficientSampleError",
    "RefinementError",
    "ResolutionError",
    "ResourceError",
    "UnsupportedError",
]
