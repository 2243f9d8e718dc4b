"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """Raised when an iteration produces non-finite values or fails to converge
    in a way that indicates an ill-conditioned input rather than a usage error."""
