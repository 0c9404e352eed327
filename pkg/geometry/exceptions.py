from curvedchsh.exceptions import CurvedChshError


class GeometryError(CurvedChshError):
    """Raised when a geometric construction cannot be completed."""

    exit_code = 3


class DegenerateMetric(GeometryError):
    pass


class IntegrationDiverged(GeometryError):
    pass


class ChartEscape(IntegrationDiverged):
    """A curve left the single coordinate chart of its spacetime."""


class NoConvergence(GeometryError):
    pass


class WrongCausalType(GeometryError):
    pass


class BaseMismatch(GeometryError):
    pass


class OrthogonalProjection(GeometryError):
    """The vector is orthogonal to the plane; its angle is undefined."""


class OpenLoop(GeometryError):
    pass


class NotOrthonormal(GeometryError):
    pass
