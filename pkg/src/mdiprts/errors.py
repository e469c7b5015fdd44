"""Exception types raised by the simulation engine."""


class PrtsError(Exception):
    """Base class for engine errors."""


class DegenerateDistributionError(PrtsError, ValueError):
    """The log-normal density was requested for a static (sigma = 0) channel."""


class EmptySelectionError(PrtsError):
    """The selected region carries (numerically) no probability mass."""


class OutOfGridError(PrtsError, ValueError):
    """A point lies outside the transmittance grid of a rate map."""


class InconsistentObservablesError(PrtsError, ValueError):
    """Observables violate basic consistency or admit no yield matrix."""


class NoBoundaryError(PrtsError):
    """The rate map does not change sign, so there is no R = 0 contour."""
