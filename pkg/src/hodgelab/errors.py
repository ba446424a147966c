"""Exception types raised across hodgelab."""


class HodgeLabError(Exception):
    """Base class for all library errors."""


class DegreeOutOfRangeError(HodgeLabError, ValueError):
    pass


class MeshGenerationError(HodgeLabError, ValueError):
    pass


class AssemblyError(HodgeLabError):
    """Degenerate element or inconsistent mesh data during assembly."""


class ShapeError(HodgeLabError, ValueError):
    pass


class SolverError(HodgeLabError, RuntimeError):
    """Eigensolver failure; carries the offending residual when known."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DefinitenessError(SolverError):
    pass


class DependentSubspaceError(HodgeLabError, ValueError):
    pass


class RangeError(HodgeLabError, ValueError):
    """A query fell outside the range where a spectrum is known to be complete."""


class RootIsolationError(HodgeLabError, RuntimeError):
    pass


class UnsupportedError(HodgeLabError, ValueError):
    """Unsupported dimension, order or domain/method pairing."""
