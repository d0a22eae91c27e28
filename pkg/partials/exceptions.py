"""Error hierarchy shared by the numeric modules and the command line."""


class MixcheckError(Exception):
    """Base class for every error raised by the partials app"""


class ParseError(MixcheckError):
    """Malformed expression source; `position` is a byte offset into it."""

    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"{message} at offset {position}")


class EvalError(MixcheckError, ArithmeticError):
    """A point where a function has no real value (division by zero, log of 0, ...)"""


class UnknownBuiltin(MixcheckError):
    """Name not present in the built-in corpus"""

    def __init__(self, name: str, known=()):
        self.name = name
        hint = f" (known: {', '.join(sorted(known))})" if known else ''
        super().__init__(f"unknown builtin '{name}'{hint}")


# ---------------- NUMERIC FAILURES (exit code 2) ----------------

class NumericFailure(MixcheckError):
    """A numeric procedure could not produce a trustworthy answer"""


class InsufficientSamples(NumericFailure):
    pass


class QuadratureFailure(NumericFailure):
    pass


class ExcludedSlice(NumericFailure):
    pass


class EmptyReport(NumericFailure):
    pass
