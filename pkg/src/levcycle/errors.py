"""Exception types shared across the simulation engine."""


class LevcycleError(Exception):
    """Base class for all package errors."""


class ConfigError(LevcycleError):
    """Malformed or inconsistent configuration. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class EstimationError(LevcycleError):
    """Estimator update fed with invalid inputs (e.g. nonpositive price)."""


class ClearingError(LevcycleError):
    """Market clearing system is numerically singular."""


class DegenerateMarketError(LevcycleError):
    """Clearing produced a nonpositive price or a degenerate denominator."""


class BankruptcyError(LevcycleError):
    """An investor's equity fell below the solvency bound."""


class ConvergenceError(LevcycleError):
    """Optimizer hit its iteration cap; carries the best iterate found."""

    def __init__(self, message: str, best_weights=None, best_objective: float = 0.0):
        self.best_weights = best_weights
        self.best_objective = best_objective
        super().__init__(message)


class MetricError(LevcycleError):
    """A summary statistic is undefined for the given series."""
