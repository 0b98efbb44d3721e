"""Exception taxonomy shared across the package.

``DataError`` subclasses signal problems with user-supplied inputs
(files, schemas, configs) and map to CLI exit code 2; ``StateError``
signals calibration state used before it holds any scores; everything
else (contract violations, internal invariants) raises ``ValueError``
or ``RuntimeError`` and maps to exit code 3 at the CLI boundary.
"""

from __future__ import annotations

__all__ = [
    "DataError",
    "SchemaError",
    "ParseError",
    "ContinuityError",
    "CoverageError",
    "ConfigError",
    "StateError",
]


class DataError(Exception):
    """Base class for invalid user input (files, schemas, configs)."""


class SchemaError(DataError):
    """A required column or field is missing or has the wrong type."""


class ParseError(DataError):
    """A cell or token could not be interpreted."""


class ContinuityError(DataError):
    """The hourly grid has a gap or a duplicated instant."""


class CoverageError(DataError):
    """A requested delivery day lacks the history its features need."""


class ConfigError(DataError):
    """A run configuration is malformed or violates an invariant."""


class StateError(Exception):
    """Calibration state was queried before it absorbed any scores."""
