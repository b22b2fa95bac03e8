"""Exception types shared across the package."""


class DispflowError(Exception):
    """Base class for every error raised by this package."""


class TooFewPoints(DispflowError):
    """Not enough usable sweep points to fit an order."""


class AllZero(DispflowError):
    """Every magnitude in a sweep is zero (or below the zero floor)."""


class Diverging(DispflowError):
    """Sweep values spread apart as the scale shrinks; no limit to extract."""


class DomainExit(DispflowError):
    """An evaluation point left its declared box.

    ``iteration`` is set when the exit happened inside an iteration loop.
    """

    def __init__(self, message, point=None, iteration=None):
        super().__init__(message)
        self.point = point
        self.iteration = iteration


class RangeOverflow(DispflowError):
    """A displacement map's image escaped its declared range box."""


class InverseDiverged(DispflowError):
    """Fixed-point inversion failed to reach tolerance within the step cap."""


class SingularJacobian(DispflowError):
    """|det J| fell below the invertibility threshold at a sample point."""


class BoundViolation(DispflowError):
    """A quantitative bound that should hold on the inputs was exceeded."""


class NotIndependent(DispflowError):
    """Field values at the base point are linearly dependent."""


class NotCommuting(DispflowError):
    """Pairwise bracket residuals are too large for a straightening chart."""


class ConfigError(DispflowError):
    """A scenario configuration failed schema or consistency validation."""


class DslError(DispflowError):
    """Base class for expression-language errors."""


class FieldSyntaxError(DslError):
    """Malformed source text; carries the byte offset and expected tokens."""

    def __init__(self, message, offset, expected=()):
        super().__init__(message)
        self.offset = offset
        self.expected = tuple(sorted(expected))


class UnknownIdentifier(DslError):
    def __init__(self, message, name, offset=None):
        super().__init__(message)
        self.name = name
        self.offset = offset


class ArityMismatch(DslError):
    def __init__(self, message, name=None, offset=None):
        super().__init__(message)
        self.name = name
        self.offset = offset


class DomainError(DslError):
    """Evaluation hit an undefined value; carries the offending subexpression."""

    def __init__(self, message, subexpression):
        super().__init__(message)
        self.subexpression = subexpression
