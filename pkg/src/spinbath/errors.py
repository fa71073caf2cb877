"""Exception types shared across the package."""


class SpinBathError(Exception):
    """Base class for errors raised by this package."""


class DegenerateConfigurationError(SpinBathError):
    """A bath box or sample is too small/empty to be meaningful."""


class FitFailureError(SpinBathError):
    """A fit did not converge; carries diagnostic detail in args."""


class EnvelopeFailureError(SpinBathError):
    """No usable maxima found when extracting a modulation envelope."""


class IntegrationFailureError(SpinBathError):
    """An ODE or quadrature routine could not meet its tolerance."""


class DataFormatError(SpinBathError):
    """An input file violated the expected schema."""
