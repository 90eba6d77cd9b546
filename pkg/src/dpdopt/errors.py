"""Exception types shared across the package."""


class TopologyError(ValueError):
    """Raised for malformed or unusable graphs (too small, disconnected)."""


class ProblemError(ValueError):
    """Raised for degenerate cost instances (non strongly convex, singular)."""


class ScheduleError(ValueError):
    """Raised for stepsize/noise schedules outside their validity domain."""


class BudgetError(ValueError):
    """Raised when a privacy spend is undefined (positive leak, zero noise)."""


class ConfigError(ValueError):
    """Raised by the config loader; carries every violation found, not just
    the first one."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in self.violations))
