"""Exception taxonomy for the toolkit.

Every failure mode raised by the public API derives from TaylorCertError,
so callers can catch one base class at the CLI boundary.
"""


class TaylorCertError(Exception):
    """Base class for all toolkit errors."""


class NumericalDomainError(TaylorCertError):
    """An evaluation produced a non-finite value inside the working box."""


class OrderError(TaylorCertError):
    """A derivative of higher order than the declared smoothness was requested."""


class ConstantsInfeasible(TaylorCertError):
    """No admissible growth constants (K, K1) exist on this box at this resolution."""


class InfeasibleBudget(TaylorCertError):
    """The requested accuracy budget admits no positive step size."""


class StepCollapse(TaylorCertError):
    """Admissible steps shrank below 1e-12 while building the sampling sequence."""


class BlowUp(TaylorCertError):
    """The integrated state escaped to a non-finite value in finite time."""


class DomainMismatch(TaylorCertError):
    """Two trajectories do not share the same sampling sequence and fine grid."""


class OracleUnreliable(TaylorCertError):
    """The reference oracle's self-consistency estimate exceeded its hard ceiling."""


class CapTooSmall(TaylorCertError):
    """The uniform impulse cap is below the initial error it must dominate."""


class ConfigError(TaylorCertError):
    """An experiment configuration is malformed or inconsistent."""
