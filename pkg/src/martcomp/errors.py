"""Exception hierarchy shared by every stage of the comparison pipeline."""


class MartcompError(Exception):
    """Base class; ``stage`` is filled in by the orchestrator when known."""

    stage: str | None = None


class ConfigurationError(MartcompError):
    pass


class DataError(MartcompError):
    pass


class IntegrabilityError(MartcompError):
    pass


class DomainError(MartcompError):
    pass


class DensityUnavailableError(MartcompError):
    """Raised when no transition density can be produced.

    ``fallback`` names the route the caller should take instead.
    """

    def __init__(self, message: str, fallback: str = "monte_carlo"):
        super().__init__(message)
        self.fallback = fallback
