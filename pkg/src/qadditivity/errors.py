class InvalidParameter(ValueError):
    """A scalar parameter (p, h, lambda, tolerance...) is outside its allowed range."""


class InvalidInput(ValueError):
    """A matrix or channel argument has the wrong shape, dimension or structure."""


class NotAState(InvalidInput):
    """Matrix is not a density matrix (negative eigenvalue or wrong trace)."""
