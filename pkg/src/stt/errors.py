"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """A scenario, document, or constructed object violates its contract."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class FunnelViolation(RuntimeError):
    """A normalized tracking error reached the funnel boundary.

    Carries the simulation time, the offending quantity's name, and its
    value so an aborted run can report exactly what went out of bounds.
    """

    def __init__(self, t: float, quantity: str, value: float):
        super().__init__(f"{quantity} left its funnel at t={t:.6g} (|{value:.6g}| >= 1)")
        self.t = t
        self.quantity = quantity
        self.value = value
