"""Exception hierarchy shared across the package."""


class FishmongerError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FishmongerError):
    """Invalid configuration: bad curve parameters, malformed config file, bad grids."""


class CurveValidityError(FishmongerError):
    """A curve violates its structural requirements (monotonicity, range, anchoring at 0)."""


class QuadratureError(FishmongerError):
    """Numeric integration failed to reach the requested tolerance."""

    def __init__(self, message: str, *, point: float, estimate: float, error: float, tolerance: float):
        super().__init__(message)
        self.point = point
        self.estimate = estimate
        self.error = error
        self.tolerance = tolerance


class ProtocolError(FishmongerError):
    """Round protocol violated: offer pending when proposing, or decision without a pending offer."""


class PolicyError(FishmongerError):
    """A buyer policy cannot produce a decision (exhausted script, no external decision fed)."""


class BudgetExceededError(FishmongerError):
    """Search-tree size exceeds the configured budget."""

    def __init__(self, message: str, *, estimated_size: int, budget: int):
        super().__init__(message)
        self.estimated_size = estimated_size
        self.budget = budget
