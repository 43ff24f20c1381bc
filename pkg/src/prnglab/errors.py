"""Exception hierarchy shared by every prnglab module."""


class PrngLabError(ValueError):
    """Base class; the CLI maps it to exit code 2."""


class DomainError(PrngLabError):
    pass


class EmptySequenceError(PrngLabError):
    pass


class CapacityError(PrngLabError):
    """Not enough distinct valid values to satisfy a sampling request."""

    def __init__(self, dimension, requested, available):
        self.dimension = dimension
        self.requested = requested
        self.available = available
        super().__init__(
            f"cannot draw {requested} distinct {dimension} values; only {available} available")


class InsufficientDataError(PrngLabError):
    pass


class InconsistentContextError(PrngLabError):
    """The context cannot have been produced by an LCG with the given modulus."""


class TokenOverflowError(PrngLabError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class StructureError(PrngLabError):
    pass


class SizingError(PrngLabError):
    pass


class CorpusFormatError(PrngLabError):
    """Version mismatch, truncation or digest mismatch in an on-disk corpus."""
