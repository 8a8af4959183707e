"""Error taxonomy shared across the harness.

Everything user-fixable derives from :class:`ValidationError` and maps to
exit code 2 at the CLI boundary; I/O failures (plain ``OSError``) map to 3.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


class ValidationError(Exception):
    """Bad input data, config, or arguments."""


class ParseError(ValidationError):
    """Structurally malformed input (wrong column count, bad header, bad JSON)."""


class StratificationError(ValidationError):
    """A class/group is too small for the requested split."""


class ConstraintViolation(ValidationError):
    """Balancer precondition broken (mismatched class sets, zero counts)."""


class ShapeError(ValidationError):
    """Tensor dimensions do not chain."""
