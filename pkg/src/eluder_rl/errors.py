"""Exception types shared across the package."""


class EluderError(Exception):
    """Base class for all package errors."""


class EnvironmentContractError(EluderError):
    """An environment violated its declared contract (reward bound, determinism, ...)."""


class InvalidActionError(EnvironmentContractError):
    pass


class OracleUnavailableError(EluderError):
    """Exact dynamic programming was requested on a simulator-only environment."""


class DPLimitExceeded(EluderError):
    pass


class AssumptionViolation(EluderError):
    """Realizability / uniqueness / gap assumptions do not hold on an instance."""


class MissingFeatureError(EluderError, KeyError):
    pass


class EmptyClassError(EluderError):
    """Every policy has been eliminated by the constraint set."""


class NotEnumerableError(EluderError):
    pass


class ConfigError(EluderError):
    """Malformed configuration or input file; carries a location string."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
