import typing as t


class LionsKitError(Exception):
    """Base class for all errors raised by lionskit."""


class ArgumentError(LionsKitError):
    """
    Raised when an argument is invalid.

    Shapes that do not fit, Gram arrays that are not Hermitian positive
    definite, operands living in different spaces.
    """


class AssumptionError(LionsKitError):
    """
    Raised when all arguments are valid, but a mathematical precondition
    does not hold, e.g. a non-coercive operator or a non-contractive
    boundary map.

    The offending vector, if one is known, is attached as ``witness``.
    """

    def __init__(self, msg: str, witness: t.Any = None, value: t.Optional[float] = None):
        super().__init__(msg)
        self.witness = witness
        self.value = value


class InvariantViolation(LionsKitError):
    """
    Raised when a guarantee of the theory fails numerically.
    """

    def __init__(self, msg: str, report: t.Optional[t.Dict[str, t.Any]] = None):
        super().__init__(msg)
        self.report = report or {}


class ConfigError(LionsKitError):
    """
    Raised when a configuration document can not be read or validated.
    """

    def __init__(self, msg: str, path: t.Optional[str] = None, field: t.Optional[str] = None):
        super().__init__(msg)
        self.path = path
        self.field = field
