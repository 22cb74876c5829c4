"""Exception hierarchy shared by all subkernel modules."""


class SubkernelError(Exception):
    """Base class for every error raised by this package."""


class QuadratureFailure(SubkernelError):
    """Adaptive quadrature hit its subdivision limit before the tolerance."""


class BracketError(SubkernelError, ValueError):
    pass


class DegenerateFunction(SubkernelError, ValueError):
    pass


class TailToleranceNotMet(SubkernelError):
    def __init__(self, K, achieved, tol):
        self.K = K
        self.achieved = achieved
        self.tol = tol
        super().__init__(
            f"weight tail {achieved:.3e} exceeds tolerance {tol:.3e} at K={K}"
        )


class DensityUnavailable(SubkernelError):
    pass


class NotALevyMeasure(SubkernelError, ValueError):
    pass


class DegenerateData(SubkernelError, ValueError):
    pass


class SizeOverflow(SubkernelError):
    pass


class ParseError(SubkernelError, ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class IsolatedVertex(SubkernelError):
    pass


class MemoryBudgetExceeded(SubkernelError, MemoryError):
    pass


class BoundaryContamination(SubkernelError):
    pass


class InsufficientBaseDepth(SubkernelError):
    pass


class NotConvergent(SubkernelError):
    """Green-function partial sums show no evidence of summability."""

    def __init__(self, message, block_ratio=None):
        self.block_ratio = block_ratio
        super().__init__(message)


class CutoffShapeError(SubkernelError, ValueError):
    pass


class DomainError(SubkernelError, ValueError):
    pass


class EmptyDomain(SubkernelError, ValueError):
    pass


class DegenerateCylinder(SubkernelError, ValueError):
    pass


class ConfigError(SubkernelError, ValueError):
    pass


class DisconnectedGraphWarning(UserWarning):
    """An edge-list graph has more than one connected component."""
