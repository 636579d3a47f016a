"""
Exception types shared by the lab engines.

Each subclasses a builtin so callers can keep catching ValueError /
RuntimeError the way the rest of the code does.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation"""


class PreconditionError(DomainError):
    """A documented precondition of an operation does not hold"""


class GridResolutionError(DomainError):
    """A sampling grid is too coarse (or misaligned) for the functions evaluated on it"""

    def __init__(self, message: str, required: int):
        super().__init__(f"{message} (required resolution: {required})")
        self.required = required


class ConsistencyError(RuntimeError):
    """An internal identity that must always hold was violated"""


class ArtifactError(DomainError):
    """A JSON input or output file is unreadable, malformed or does not match its schema"""
