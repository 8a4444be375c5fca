"""Transmon / NV-spin hybrid circuit simulator."""

from .errors import HybridSimError, NotDispersiveError, PreconditionError, SingularPointError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "HybridSimError",
    "NotDispersiveError",
    "PreconditionError",
    "SingularPointError",
    "ValidationError",
    "__version__",
]
