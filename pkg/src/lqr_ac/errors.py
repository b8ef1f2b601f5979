"""Exception types shared across the package."""


class LqrError(Exception):
    """Base class for all package errors."""


# numerics
class NotPSD(LqrError):
    pass


class NonConvergence(LqrError):
    pass


class SingularSystem(LqrError):
    pass


class DimensionMismatch(LqrError, ValueError):
    pass


# model layer
class InvalidModel(LqrError, ValueError):
    """An LqrModel invariant is violated (e.g. Q not positive definite)."""


class UnstableGain(LqrError):
    """rho(A - BK) >= 1, so no stationary distribution exists."""

    def __init__(self, radius, message=None):
        self.radius = float(radius)
        super().__init__(message or f"gain is not stabilizing: rho(A - BK) = {self.radius:.6g} >= 1")


class RiccatiNonConvergence(LqrError):
    pass


class UnstableClosedLoop(LqrError):
    pass


class AsymmetricTheta(LqrError, ValueError):
    pass


# sampling / training
class StateBlowup(LqrError):
    def __init__(self, norm, guard):
        self.norm = float(norm)
        self.guard = float(guard)
        super().__init__(f"state norm {self.norm:.3g} exceeded guard {self.guard:.3g}")


class AssumptionViolated(LqrError):
    def __init__(self, t, radius, guard):
        self.t = int(t)
        self.radius = float(radius)
        self.guard = float(guard)
        super().__init__(
            f"closed-loop spectral radius {self.radius:.6g} >= {self.guard:.6g} at iteration {self.t}"
        )


class NonPositiveConstant(LqrError, ValueError):
    pass


class ModelParseError(LqrError, ValueError):
    pass
