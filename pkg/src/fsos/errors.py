"""Exception types shared across the package."""

from __future__ import annotations


class FsosError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(FsosError):
    """Operands belong to different groups or have wrong lengths."""


class DenseCapExceeded(FsosError):
    """A dense operation was requested on a group above the configured cap."""


class SparsityCapExceeded(FsosError):
    """A sparse product grew past the configured term cap."""


class DimacsError(FsosError):
    """Malformed DIMACS input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CertificateError(FsosError):
    """A certificate could not be parsed or is structurally invalid."""


class RoundingError(FsosError):
    """A rounding method could not produce a candidate."""


class SolverError(FsosError):
    """Numerical failure inside the SDP machinery (e.g. eigensolver)."""
