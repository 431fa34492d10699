"""Exception types raised across the package."""


class MvImpulseError(Exception):
    """Base class for all package errors."""


class InvalidParam(MvImpulseError, ValueError):
    """One or more model parameters violate their constraints.

    ``violations`` holds ``(field, constraint)`` pairs, one per failed check.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{field}: {constraint}" for field, constraint in self.violations)
        super().__init__(msg)

    @property
    def fields(self):
        return [field for field, _ in self.violations]


class ConfigError(MvImpulseError, ValueError):
    """Malformed or incomplete configuration file."""


class BadCount(MvImpulseError, ValueError):
    pass


class NonFinite(MvImpulseError, FloatingPointError):
    pass


class GridMismatch(MvImpulseError, ValueError):
    pass


class Inadmissible(MvImpulseError, ValueError):
    pass


class NoAdmissibleImpulse(MvImpulseError, ValueError):
    pass


class BoundaryCase(MvImpulseError, ValueError):
    """alpha0 == rho: neither the finite nor the infinite value case applies."""


class InfiniteValue(MvImpulseError, ValueError):
    """alpha0 > rho: the value function is +infinity."""


class NoRoot(MvImpulseError, ValueError):
    pass


class BadBarrier(MvImpulseError, ValueError):
    pass
