"""Exception types raised by the simulation engine."""


class BarpairError(Exception):
    """Base class for all package errors."""


class CutoffOverflow(BarpairError):
    """A state or joint state would need more Fock levels than allowed."""


class NonConvergedTail(BarpairError):
    """The tail-mass target is unreachable at the maximum dimension."""


class NotPRepresentable(BarpairError):
    """The state carries no proper P-function; use the exact path."""


class QuadratureNotConverged(BarpairError):
    """Doubling the quadrature nodes still moves matrix entries."""


class GridTooSmall(BarpairError):
    """A quadrature grid clips non-negligible probability mass."""


class EnvelopeTooTight(BarpairError):
    """A rejection-sampling proposal was exceeded by the target density."""


class InsufficientSamples(BarpairError):
    """Too few samples for the requested estimator."""


class ZeroMarginalMean(BarpairError):
    """A ratio estimator has a zero sample mean in its denominator."""


class ZeroP1(BarpairError):
    """The single-click frequency is zero; 2*P2*P0/P1^2 is undefined."""


class VacuumDetectors(BarpairError):
    """Both detector occupancies vanish; coherence ratio undefined."""


class UndefinedForVacuum(BarpairError):
    """A normalised correlator is undefined at zero mean occupancy."""


class ApproximationDomain(BarpairError):
    """Inputs left the validity domain of a weak-coupling formula."""


class NonFinite(BarpairError):
    """A physical rate evaluated to a non-finite number."""


class ConfigError(BarpairError):
    """An experiment configuration is malformed or incomplete."""
