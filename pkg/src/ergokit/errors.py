"""Exception types raised across ergokit."""


class ErgokitError(Exception):
    """Base class for all library errors."""


class DimensionError(ErgokitError, ValueError):
    pass


class InvalidModelError(ErgokitError, ValueError):
    """A rate matrix, kernel, model or certificate violates its invariants."""


class NotIrreducibleError(ErgokitError):
    pass


class SingularSystemError(ErgokitError):
    """A linear system defining a resolvent or hitting functional has no finite solution."""


class CensoredError(ErgokitError):
    """Every Monte Carlo path hit the censoring cap before its stopping time."""


class ExplosionError(ErgokitError):
    """A simulated path produced a non-finite state."""


class DSLError(ErgokitError):
    pass


class ParseError(DSLError):
    def __init__(self, message, source="", index=0):
        line = source.count("\n", 0, index) + 1
        column = index - (source.rfind("\n", 0, index) + 1) + 1
        offset = len(source[:index].encode("utf-8"))
        super().__init__(f"{message} (line {line}, column {column}, byte {offset})")
        self.index = index
        self.offset = offset
        self.line = line
        self.column = column


class DomainError(DSLError, ArithmeticError):
    pass


class ConfigError(ErgokitError):
    """Invalid configuration file; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
