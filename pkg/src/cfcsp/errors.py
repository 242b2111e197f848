"""Exception hierarchy.

Two broad families matter to callers: :class:`DataError` (bad input data or
files; the CLI maps these to exit code 2) and :class:`InvariantError`
(something that should never happen; exit code 3). Everything derives from
:class:`CfcspError`.
"""

from __future__ import annotations

from pathlib import Path


class CfcspError(Exception):
    pass


class DataError(CfcspError):
    """Input data violates a documented contract."""


class InvariantError(CfcspError):
    """An internal invariant was violated."""


class InvalidLabelError(DataError, ValueError):
    pass


class SchemeValidationError(DataError, ValueError):
    pass


class InvalidInputError(DataError, ValueError):
    """Non-finite values where finite reals are required."""


class ShapeError(DataError, ValueError):
    pass


class NoModelsError(DataError, ValueError):
    pass


class AlignmentError(DataError, ValueError):
    pass


class MissingNegativeScoresError(DataError):
    pass


class EmptyInputError(DataError, ValueError):
    pass


class ContiguityError(DataError, ValueError):
    pass


class UndefinedFactorError(DataError, ValueError):
    pass


class ParamsError(DataError, ValueError):
    pass


class ParseError(DataError):
    """Malformed file content. Always carries the path and a 1-based line."""

    def __init__(self, path: str | Path, line: int, message: str):
        self.path = str(path)
        self.line = line
        self.message = message
        super().__init__(f"{self.path}:{line}: {message}")

    def __reduce__(self):
        return (type(self), (self.path, self.line, self.message))


class MissingFileError(DataError):
    pass
