"""Exception hierarchy shared by the package."""


class BVPError(Exception):
    """Base class for every error raised by fittedbvp."""


class ExpressionError(BVPError):
    pass


class ExprSyntaxError(ExpressionError):
    """Malformed expression text. ``position`` is a 0-based character offset."""

    def __init__(self, message, position, source=""):
        self.position = position
        self.source = source
        super().__init__(f"{message} at offset {position}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class UnknownFunctionError(ExprSyntaxError):
    pass


class EvaluationError(ExpressionError):
    pass


class MissingBindingError(EvaluationError):
    pass


class DomainError(EvaluationError):
    """Evaluation outside an operation's domain, such as ln of a non-positive number."""


class InvalidProblemError(BVPError, ValueError):
    pass


class MeshError(BVPError, ValueError):
    pass


class SingularSystemError(BVPError):
    def __init__(self, row, pivot):
        self.row = row
        self.pivot = pivot
        super().__init__(f"zero or subnormal pivot {pivot!r} in row {row}")


class NonFiniteError(BVPError):
    pass


class ConfigError(BVPError):
    pass
