"""Exception hierarchy shared across the package."""


class TsforgeError(Exception):
    """Base class for all user-facing errors."""


class ParseError(TsforgeError, ValueError):
    """Raised when a DSL string cannot be turned into an expression tree."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} (at position {position})")


class ExprSyntaxError(ParseError):
    pass


class UnknownVariable(ParseError):
    pass


class ZeroLag(ParseError):
    pass


class UnknownFunction(ParseError):
    pass


class InfeasibleParams(TsforgeError):
    pass


class GenerationExhausted(TsforgeError):
    pass


class SchedulingFailed(TsforgeError):
    pass


class NoCandidate(TsforgeError):
    pass


class ConfigError(TsforgeError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
