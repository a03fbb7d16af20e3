"""OCNN toolkit exception hierarchy."""
from __future__ import annotations
from typing import Any, Optional


class OcnnError(Exception):
    """Base class for every error raised by the toolkit."""


class ShapeError(OcnnError, ValueError):
    def __init__(self, what: str, left: tuple, right: tuple):
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{what}: shape {self.left} incompatible with {self.right}")


class ConfigError(OcnnError, ValueError):
    """Raised when validate() returned one or more messages."""

    def __init__(self, errors: list[str] | str):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


class DataParseError(OcnnError, ValueError):
    def __init__(self, message: str, path: str = "", row: Optional[int] = None,
                 column: Optional[str] = None):
        self.path = path
        self.row = row
        self.column = column
        where = []
        if path:
            where.append(path)
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class NumericalError(OcnnError, ArithmeticError):
    """A numerical contract broke (non-finite values, a monotonicity check). May carry partial history."""

    def __init__(self, message: str, history: Optional[list[Any]] = None):
        self.history = list(history or [])
        super().__init__(message)


class DivergenceError(OcnnError, ArithmeticError):
    """Non-finite loss or objective during training. History is kept for the caller."""

    def __init__(self, message: str, epoch: Optional[int] = None, history: Optional[list[Any]] = None):
        self.epoch = epoch
        self.history = list(history or [])
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
