"""Exception types shared across the package."""


class CapabilityError(RuntimeError):
    """Requested computation exceeds a documented capability cap."""


class ValidationError(ValueError):
    """Input violates a precondition (off-cone point, bad dimension, ...)."""


class PropertyViolation(AssertionError):
    """A verification suite found a counterexample."""

    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


class EnsembleIOError(RuntimeError):
    """Ensemble output could not be written; partial results were flushed."""

    def __init__(self, message, completed=0, path=None):
        super().__init__(message)
        self.completed = completed
        self.path = path
