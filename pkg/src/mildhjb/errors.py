"""Exception hierarchy shared by all modules."""


class MildHJBError(Exception):
    """Base class for toolkit errors."""


class DimensionError(MildHJBError, ValueError):
    """Vectors or operators of incompatible dimension."""


class DomainError(MildHJBError, ValueError):
    """Argument outside the domain of an operation (e.g. negative time)."""


class ParameterError(MildHJBError, ValueError):
    """Model parameters for which a formula is undefined."""


class ConfigurationError(MildHJBError, ValueError):
    """Invalid experiment or estimator configuration."""


class CapabilityError(MildHJBError):
    """A candidate lacks a handle that an operation requires."""


class SimulationDiverged(MildHJBError):
    """A replica left the finite range; carries the first bad step."""

    def __init__(self, step, replica=0, message=None):
        self.step = step
        self.replica = replica
        super().__init__(message or f"simulation diverged at step {step} (replica {replica})")


class PolicyRangeError(MildHJBError):
    """A policy returned a control outside the control set."""

    def __init__(self, step, value, replica=0):
        self.step = step
        self.value = value
        self.replica = replica
        super().__init__(f"control {value!r} outside the control set at step {step} (replica {replica})")


class IdentityInapplicable(MildHJBError):
    """The Hamiltonian is infinite along a path, so the identity cannot be formed."""

    def __init__(self, time, replica=0):
        self.time = time
        self.replica = replica
        super().__init__(f"Hamiltonian is infinite along the path at t={time!r} (replica {replica})")
