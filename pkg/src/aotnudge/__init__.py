"""
Nudging (AOT) data assimilation twin experiments on the Lorenz 1963 system,
the periodic KdV equation and 2D incompressible Euler.
"""

from .errors import (
    CFLError,
    ConfigError,
    DivergenceError,
    MalformedFieldError,
    ResolutionError,
    UndefinedFitError,
)

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "ConfigError",
    "DivergenceError",
    "MalformedFieldError",
    "ResolutionError",
    "UndefinedFitError",
]
