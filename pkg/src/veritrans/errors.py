"""Exception hierarchy shared across the package."""


class VeriTransError(Exception):
    """Base class for all package errors."""


class LexError(VeriTransError):
    def __init__(self, position: int, snippet: str, message: str = "unexpected character"):
        self.position = position
        self.snippet = snippet
        super().__init__(f"{message} at offset {position}: {snippet!r}")


class ParseError(VeriTransError):
    pass


class CompileError(VeriTransError):
    pass


class FormatError(VeriTransError):
    """Malformed DIMACS input."""


class ResourceError(VeriTransError):
    """Solver decision budget exhausted."""


class CapacityError(VeriTransError):
    pass


class EmptyTextError(VeriTransError):
    pass


class RangeError(VeriTransError, ValueError):
    pass


class EmptyInputError(VeriTransError, ValueError):
    pass


class MissingAliasError(VeriTransError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"no alias for variables: {', '.join(self.missing)}")


class TransportError(VeriTransError):
    pass


class AuthError(VeriTransError):
    pass


class SchemaError(VeriTransError):
    pass


class DegenerateSampleError(VeriTransError, ValueError):
    pass


class InsufficientDataError(VeriTransError, ValueError):
    pass


class DatasetFormatError(VeriTransError):
    pass
