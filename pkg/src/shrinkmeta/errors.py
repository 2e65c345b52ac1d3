"""Exceptions shared by the Python code and the compiled kernels."""


class DegeneratePosteriorError(FloatingPointError):
    """Every node of the tau grid has zero or non-finite posterior density."""


class IntervalNotConverged(ArithmeticError):
    """A shrinkage interval could not be bracketed or did not settle under grid refinement."""

    def __init__(self, message="interval not converged", replication=None):
        self.replication = replication
        if replication is not None:
            message = f"{message} (replication {replication})"
        super().__init__(message)
