"""Exception hierarchy and warning categories shared across the package."""


class FcirError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FcirError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation was requested exactly on a kernel singularity."""


class UnsupportedRegimeError(FcirError, ValueError):
    """Parameter regime outside what the implemented analysis covers."""


class NumericalError(FcirError, RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""


class EmbeddingFallbackWarning(UserWarning):
    """Circulant embedding was rejected and the sampler fell back to Cholesky."""
