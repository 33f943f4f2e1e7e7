class PinnRayError(Exception):
    """Base class for all package errors."""


class EvaluationError(PinnRayError, FloatingPointError):
    """Network evaluation produced a non-finite value."""


class ConfigurationError(PinnRayError, ValueError):
    pass


class GeometryError(PinnRayError, ValueError):
    pass


class MeshParseError(PinnRayError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AssemblyError(PinnRayError, ValueError):
    pass


class SingularSystemError(PinnRayError, ArithmeticError):
    pass


class SingularMaterialError(PinnRayError, ValueError):
    pass


class DivergenceError(PinnRayError, FloatingPointError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, last_finite_epoch: int | None = None, history=None):
        self.last_finite_epoch = last_finite_epoch
        self.history = history
        super().__init__(message)
