"""Exception types shared across the simulator."""


class DubinsimError(Exception):
    """Base class for all package-specific errors."""


class StateIntegrityError(DubinsimError):
    """Plant update saw or produced a non-finite value; usually controller divergence."""


class ControllerFault(DubinsimError):
    """Controller received a non-finite measurement."""


class HorizonTooLongError(DubinsimError):
    """Receding-horizon exponent argument exceeded the overflow guard."""


class InfeasibleBypassError(DubinsimError):
    """No collision-free tangent-arc-tangent bypass could be constructed."""


class DegeneratePathError(DubinsimError):
    """Reference path specification is degenerate (zero length, zero radius, ...)."""


class ConfigError(DubinsimError):
    """Scenario configuration failed validation."""
