"""Exception hierarchy shared by every module."""


class GermcanopError(Exception):
    """Base class for library errors."""


class NumericalFailure(GermcanopError):
    """A numerical procedure produced non-finite values or did not converge."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class InvalidInput(GermcanopError, ValueError):
    """Arguments violate a documented precondition."""


class InsufficientData(GermcanopError):
    """Samples carry no usable information (e.g. all on the zero locus)."""


class DegenerateChart(GermcanopError):
    """A Jacobian or Hessian block that must be invertible is singular."""


class PositivityViolation(GermcanopError):
    """A positivity or definiteness property failed.

    Attributes
    ----------
    witness : object
        The sample at which the violation was observed, if any.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BranchFailure(GermcanopError):
    """A logarithm branch could not be continued (value too close to zero)."""


class ResolutionError(GermcanopError):
    """A grid or quadrature is too coarse for the requested accuracy.

    Attributes
    ----------
    required : int or None
        Node count that would satisfy the resolution rule.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class QuantizationError(GermcanopError):
    """The quantization condition fails where it is required."""


class UnsupportedSymbol(GermcanopError):
    """A Hamiltonian symbol cannot be applied with the fixed operator ordering."""
