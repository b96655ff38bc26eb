"""Exception types shared across the package."""


class NumericalCheckError(RuntimeError):
    """An internal consistency check on computed quantities failed."""
