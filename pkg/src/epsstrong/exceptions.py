"""Exception types shared across the package."""


class DomainError(ValueError):
    """Arguments outside the domain of a probability or sampler."""


class UndecidedError(RuntimeError):
    """An exact comparison could not be settled within the term budget.

    Raised instead of silently truncating a series, so that callers can
    discard the draw and keep the estimator unbiased.
    """

    def __init__(self, message="comparison undecided within max_terms", **context):
        self.context = context
        if context:
            extra = ", ".join(f"{k}={v}" for k, v in context.items())
            message = f"{message} ({extra})"
        super().__init__(message)


class SamplerStallError(RuntimeError):
    """A rejection loop exceeded its iteration cap."""
