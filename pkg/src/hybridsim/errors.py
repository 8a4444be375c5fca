"""Exception hierarchy shared by the library and the CLI."""


class HybridSimError(Exception):
    """Base class for every error raised by hybridsim."""


class ValidationError(HybridSimError, ValueError):
    """A parameter or config value violates a type invariant."""


class PreconditionError(HybridSimError, ValueError):
    """A numerical precondition (dispersive regime, resonance, ...) does not hold."""


class SingularPointError(PreconditionError):
    """Field evaluation point lies too close to a current-carrying segment."""


class NotDispersiveError(PreconditionError):
    """Coupling-to-detuning ratio exceeds the dispersive-regime limit."""
