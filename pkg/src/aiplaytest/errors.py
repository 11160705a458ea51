"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid level, agent or file configuration."""


class MissingWeightsError(ConfigurationError):
    """A policy-guided agent was asked to play a level with no trained weights."""


class ContractViolation(RuntimeError):
    """An operation was called outside its precondition."""


class InsufficientDataError(ValueError):
    """Too few samples to fit the requested model."""


class UndefinedCorrelationError(ValueError):
    """Rank correlation is undefined because one input has zero rank variance."""
