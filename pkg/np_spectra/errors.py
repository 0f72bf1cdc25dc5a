"""
NP Spectra - Error Types
Exception hierarchy shared by the numerical modules and the CLI.

The CLI maps each class to a process exit code via ``exit_code``.
"""

from typing import Any, Dict


class NPSpectraError(Exception):
    """Base class for every error raised by np_spectra."""

    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code
        }


# ============================================================================
# GEOMETRY
# ============================================================================

class GeometryError(NPSpectraError):
    exit_code = 2


class DegenerateGeometry(GeometryError):
    pass


class SelfIntersecting(GeometryError):
    pass


class InvalidMesh(GeometryError):
    pass


class OutOfRange(GeometryError):
    pass


# ============================================================================
# KERNELS / CURVES
# ============================================================================

class KernelError(NPSpectraError):
    exit_code = 2


class StripViolation(KernelError):
    pass


class SingularPoint(KernelError):
    pass


class OnCurve(NPSpectraError):
    exit_code = 2


class PoleInput(NPSpectraError):
    exit_code = 2


class InvalidParams(NPSpectraError):
    exit_code = 2


# ============================================================================
# SPECTRA
# ============================================================================

class NotLipschitz(NPSpectraError):
    exit_code = 3


class NoConvergence(NPSpectraError):
    exit_code = 4
