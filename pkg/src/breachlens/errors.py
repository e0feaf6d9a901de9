class BreachlensError(Exception):
    """Base class for all package errors."""


class ParseError(BreachlensError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(BreachlensError):
    pass


class DomainError(BreachlensError, ValueError):
    """An input lies outside the domain an operation is defined on."""


class ConvergenceError(BreachlensError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class DegenerateFitError(BreachlensError):
    pass


class InputError(BreachlensError):
    """The input data file is missing or unreadable."""


class PreconditionError(BreachlensError):
    """A pipeline stage cannot run on what earlier stages produced."""
