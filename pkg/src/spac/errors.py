"""Exception hierarchy shared by all modules.

Every error raised on bad input or failed computation derives from
:class:`SpacError`, so the CLI can map the whole family to exit code 2.
"""


class SpacError(Exception):
    """Base class for all package errors."""


class DimensionError(SpacError, ValueError):
    pass


class NonFiniteInput(SpacError, ValueError):
    pass


class ZeroVarianceColumn(SpacError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} has zero sample variance")


class ParseError(SpacError, ValueError):
    def __init__(self, line, message="could not parse value"):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingColumn(SpacError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing column"


class SingularDesign(SpacError, ValueError):
    pass


class DegenerateResidual(SpacError, ValueError):
    def __init__(self, column, variance):
        self.column = column
        self.variance = variance
        super().__init__(
            f"residual variance {variance:.3e} for column {column} is degenerate")


class NoConvergence(SpacError, RuntimeError):
    """Iterative solver hit its iteration cap.

    ``partial`` holds whatever the solver had when it stopped (a fit object
    or coefficient vector) so callers may still inspect it.
    """

    def __init__(self, message, iterations=None, partial=None):
        self.iterations = iterations
        self.partial = partial
        super().__init__(message)


class NonFiniteIterate(SpacError, FloatingPointError):
    pass


class AllZeroResponse(SpacError, ValueError):
    pass


class NoConvergedFit(SpacError, RuntimeError):
    pass


class NotPositiveDefinite(SpacError, ValueError):
    def __init__(self, min_eigenvalue):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")


class NegativeEntry(SpacError, ValueError):
    pass


class DegenerateDenominator(SpacError, ZeroDivisionError):
    pass


class DegenerateTruth(SpacError, ValueError):
    pass


class UnknownSetting(SpacError, ValueError):
    pass


class SimulationAborted(SpacError, RuntimeError):
    pass
