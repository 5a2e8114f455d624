"""Exception hierarchy shared by every hilbend module."""


class HilbendError(Exception):
    """Base class for all library errors."""


class GeometryError(HilbendError):
    pass


class NonCollinear(GeometryError):
    pass


class DegenerateConfiguration(GeometryError):
    pass


class AtInfinity(GeometryError):
    pass


class SingularForm(GeometryError):
    pass


class TangentWall(GeometryError):
    pass


class NotInterior(GeometryError):
    pass


class NumericalFailure(GeometryError):
    pass


class SignatureLost(GeometryError):
    pass


class NotOnBoundary(GeometryError):
    pass


class ZeroVector(GeometryError):
    pass


class RegionNotContained(GeometryError):
    pass


class IncidentPolePlane(GeometryError):
    pass


class WallMissesDomain(GeometryError):
    pass


class PoleInsideDomain(GeometryError):
    pass


class RelationViolated(HilbendError):
    pass


class WallsIntersect(HilbendError):
    pass


class NoHyperbolicFound(HilbendError):
    pass


class StabilizerNontrivial(HilbendError):
    pass


class DimensionUnsupported(HilbendError):
    pass


class SchemaError(HilbendError):
    """Invalid scene document.

    ``location`` names the offending field as a dotted path and ``line``
    is the 1-based line of the JSON text when it can be recovered.
    """

    def __init__(self, message, location=None, line=None):
        self.location = location
        self.line = line
        where = []
        if location:
            where.append(f"field '{location}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))
