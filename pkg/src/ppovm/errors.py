"""Exception hierarchy shared by all modules."""


class PpovmError(Exception):
    """Base class for all domain errors raised by the toolkit."""


class DecompositionError(PpovmError):
    """A matrix factorization did not converge."""

    def __init__(self, shape, message="decomposition failed"):
        super().__init__(f"{message} for matrix of shape {tuple(shape)}")
        self.shape = tuple(shape)


class DimensionError(PpovmError, ValueError):
    pass


class NotHermitianError(PpovmError, ValueError):
    def __init__(self, residual):
        super().__init__(f"matrix is not Hermitian (residual {residual:.3e})")
        self.residual = residual


class NegativeEigenvalueError(PpovmError, ValueError):
    def __init__(self, eigenvalue):
        super().__init__(f"matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")
        self.eigenvalue = eigenvalue


class InvariantError(PpovmError, ValueError):
    """An object failed one of its structural invariants."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class NotEquivalentError(PpovmError):
    pass


class NotMinimalError(PpovmError):
    pass


class SplitInconsistencyError(PpovmError):
    pass


class DegenerateDirectionError(PpovmError):
    pass


class NotInLmError(PpovmError):
    pass


class ZeroWeightError(PpovmError):
    pass
