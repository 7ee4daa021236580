class PsafeError(Exception):
    """Base class for every error raised by the library."""


class MapFormatError(PsafeError):
    pass


class MapSizeError(PsafeError):
    pass


class EmptyDomainError(PsafeError):
    pass


class ShapeMismatchError(PsafeError):
    pass


class NonConvergenceError(PsafeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"SOR did not converge: residual {residual:.3e} after {iterations} iterations"
        )
        self.residual = residual
        self.iterations = iterations


class InfeasibleFilterError(PsafeError):
    pass


class UnsafeInitialStateError(PsafeError):
    pass
