"""Exception hierarchy shared across the package."""


class FracAdiError(Exception):
    """Base class for all solver errors."""


class NonFiniteFieldError(FracAdiError):
    """A grid function picked up NaN or Inf values."""


class SingularMatrixError(FracAdiError):
    """LU factorization hit a (numerically) zero pivot."""

    def __init__(self, pivot_index: int, message: str | None = None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix is singular to working precision at pivot {pivot_index}")


class InadmissibleSchemeError(FracAdiError):
    """A time-stepping scheme was requested for a problem it cannot solve."""


class OracleSizeError(FracAdiError):
    """A dense Kronecker oracle was requested beyond its size cap."""


class RichardsonError(FracAdiError):
    """Refined-grid forcing values failed the Richardson agreement check."""

    def __init__(self, discrepancy: float, tol: float):
        self.discrepancy = discrepancy
        self.tol = tol
        super().__init__(f"Richardson discrepancy {discrepancy:.3e} exceeds tolerance {tol:.1e}")


class StepFailure(FracAdiError):
    """A time step failed; carries the step index."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step} failed: {cause}")
