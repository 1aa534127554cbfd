"""Exception types shared across the package."""


class BtlcapError(Exception):
    """Base class for all package errors."""


class SpectrumError(BtlcapError):
    """A spectrum definition is unphysical or malformed."""


class ExtrapolationError(SpectrumError):
    """A tabulated spectrum was evaluated outside its sample range."""


class NumericalError(BtlcapError):
    """A numerical procedure failed to reach its accuracy target.

    The optional ``estimate`` attribute carries the achieved error estimate.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DivergenceError(BtlcapError):
    """A capacity integral diverges (transmissivity pinned at 1 on a set of
    positive measure)."""


class NoOpenChannelError(BtlcapError):
    """No channel is open anywhere inside the requested search bracket."""


class BoundInapplicableError(BtlcapError):
    """The top-transmissivity bound requires a monotonically decreasing
    spectral tail, and the spectrum does not have one."""


class DimensionError(BtlcapError):
    """Mode sets or grids that must share a discretization do not."""


class ConfigError(BtlcapError):
    """A run configuration failed to parse or validate."""
