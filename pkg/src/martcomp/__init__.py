"""Numerical comparison of expectations of semimartingales via propagation operators."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DataError, DensityUnavailableError, DomainError,  # noqa: E402
                     IntegrabilityError, MartcompError)

__all__ = ["__version__", "MartcompError", "ConfigurationError", "DataError", "IntegrabilityError",
           "DomainError", "DensityUnavailableError"]
