from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError

AGENTS = ("vanilla", "policy", "myopic", "policy-myopic", "policy-only")


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one agent run on one level."""

    level_id: int
    agent: str
    seed: int
    passed: bool
    moves_used: int
    moves_left: int
    goals_cleared_fraction: float
    agent_budget: int

    def __post_init__(self):
        if self.moves_left < 0:
            raise ConfigurationError("moves_left must be >= 0")
        if self.moves_left > 0 and not self.passed:
            raise ConfigurationError("moves_left > 0 requires passed")
        if self.passed and self.goals_cleared_fraction != 1.0:
            raise ConfigurationError("passed run must clear all goals")
        if not 0.0 <= self.goals_cleared_fraction <= 1.0:
            raise ConfigurationError("goals_cleared_fraction outside [0, 1]")

    @property
    def moves_left_ratio(self) -> float:
        return self.moves_left / self.agent_budget


def _check_rates(obj):
    for name in ("pass_rate", "churn_rate"):
        v = getattr(obj, name)
        if not 0.0 <= v <= 1.0:
            raise ConfigurationError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class LevelPrediction:
    level_id: int
    pass_rate: float
    churn_rate: float

    def __post_init__(self):
        _check_rates(self)


@dataclass(frozen=True)
class GroundTruthRecord:
    """Observed (here: synthetic) player pass and churn rate of one level."""

    level_id: int
    pass_rate: float
    churn_rate: float

    def __post_init__(self):
        _check_rates(self)
