"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (I/O = 2, validation = 3, domain = 4),
so raising the right class matters for scripted callers.
"""


class HardbindError(Exception):
    """Base class for all package errors."""


class FormatError(HardbindError):
    """A file or document failed to parse or violates its schema."""


class ValidationError(HardbindError):
    """Arguments or configuration are structurally invalid."""


class DomainError(HardbindError):
    """A semantically invalid operation on otherwise well-formed data,
    e.g. merging a concept that is no longer live."""


class VersionConflict(DomainError):
    """A mutation was drafted against a stale corpus version."""
