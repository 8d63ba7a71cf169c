"""Exception hierarchy shared by all fanoguide modules."""


class FanoguideError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FanoguideError, ValueError):
    """An input lies outside the domain of an operation."""


class BandEdgeError(DomainError):
    """The spectral parameter sits on a transverse cutoff pi^2 j^2."""


class GeometryError(DomainError):
    """Invalid geometry (inclusion touching a wall, negative length, ...)."""


class MeshError(FanoguideError):
    """Malformed or invalid mesh."""


class MeshParseError(MeshError):
    pass


class MeshResolutionError(MeshError):
    """The requested mesh size cannot resolve the geometry."""


class OrientationError(MeshError):
    pass


class MissingTagError(MeshError):
    pass


class ArcAlignmentError(MeshError):
    """Requested boundary arc is not made of mesh boundary edges."""


class SolverError(FanoguideError):
    """The discrete problem could not be solved."""


class NearResonanceError(SolverError):
    """The assembled system is (numerically) singular.

    Carries the spectral parameter and the smallest pivot magnitude seen by
    the factorization.
    """

    def __init__(self, message, lam=None, pivot=None):
        super().__init__(message)
        self.lam = lam
        self.pivot = pivot


class InconsistentMatrixError(FanoguideError):
    """An augmented scattering matrix violates unitarity in a way that makes
    the reduction formula undefined."""


class NotFoundError(FanoguideError):
    """A search (trapped mode, zero of R or T) found nothing in its window.

    ``table`` holds the scan that was performed, as a list of tuples.
    """

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table or []


class ConfigError(FanoguideError):
    """Configuration failed validation."""
