"""Exception hierarchy shared across the package.

Every error carries a ``exit_code`` so the command line can map failures to
process status without inspecting types one by one.
"""

from __future__ import annotations


class MMOTError(Exception):
    exit_code = 1


class ConfigError(MMOTError):
    exit_code = 2


class DataError(MMOTError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class InvalidMeasure(DataError):
    pass


class DimensionError(DataError):
    pass


class EmptyClassError(DataError):
    pass


class InvalidInput(DataError):
    pass


class TooManyClusters(DataError):
    pass


class NumericalError(MMOTError):
    exit_code = 4


class MarginalMismatch(NumericalError):
    pass


class NumericalBlowup(NumericalError):
    pass


class DegenerateRow(NumericalError):
    pass


class IoError(MMOTError):
    exit_code = 3
